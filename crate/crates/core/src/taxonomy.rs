//! Category sets and the raw-label mapping applied during ingestion.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Index into a [`Taxonomy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CategoryId(pub u16);

impl CategoryId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// The twelve place categories used for Foursquare check-ins.
pub const FOURSQUARE_CATEGORIES: [&str; 12] = [
    "Arts and Entertainment",
    "Business and Professional Services",
    "Coffee and Dessert",
    "Dining",
    "Education",
    "Health and Medicine",
    "Landmarks and Outdoors",
    "Nightlife",
    "Retail",
    "Spiritual Centers",
    "Sports and Recreation",
    "Travel and Transportation",
];

/// Ordered list of category labels.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Taxonomy {
    labels: Vec<String>,
}

impl Taxonomy {
    pub fn new<S: AsRef<str>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(|s| s.as_ref().trim().to_owned()).collect();
        if labels.is_empty() || labels.len() > u16::MAX as usize {
            return Err(Error::invalid("taxonomy must hold between 1 and 65535 categories"));
        }
        let mut seen = BTreeMap::new();
        for l in &labels {
            if l.is_empty() || seen.insert(l.to_lowercase(), ()).is_some() {
                return Err(Error::invalid(alloc::format!("bad or duplicate category label {l:?}")));
            }
        }
        Ok(Taxonomy { labels })
    }

    pub fn foursquare() -> Self {
        Taxonomy::new(FOURSQUARE_CATEGORIES).expect("static taxonomy is valid")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, id: CategoryId) -> &str {
        &self.labels[id.index()]
    }

    /// Case-insensitive lookup.
    pub fn id(&self, label: &str) -> Option<CategoryId> {
        let label = label.trim();
        self.labels
            .iter()
            .position(|l| l.eq_ignore_ascii_case(label))
            .map(|i| CategoryId(i as u16))
    }

    pub fn ids(&self) -> impl Iterator<Item = CategoryId> {
        (0..self.labels.len() as u16).map(CategoryId)
    }

    /// Lowercase identifier safe for column names.
    pub fn slug(&self, id: CategoryId) -> String {
        slugify(self.label(id))
    }
}

pub fn slugify(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') && !out.is_empty() {
            out.push('_');
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

/// What a raw source label turns into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelTarget {
    Category(CategoryId),
    Drop,
}

#[derive(Debug, Clone)]
enum Pattern {
    Prefix(String),
    Suffix(String),
    Contains(String),
}

impl Pattern {
    fn matches(&self, label: &str) -> bool {
        match self {
            Pattern::Prefix(p) => label.starts_with(p.as_str()),
            Pattern::Suffix(p) => label.ends_with(p.as_str()),
            Pattern::Contains(p) => label.contains(p.as_str()),
        }
    }
}

/// Raw source label → category or drop marker.
///
/// Text format, one record per line: `label<TAB>target`, where target is a
/// taxonomy label or `DROP`. `#` starts a comment line. Labels match
/// case-insensitively. A label may carry a leading and/or trailing `*`
/// wildcard (`*Restaurant`, `College*`, `*Shop*`); exact entries win over
/// wildcards, and wildcards apply in file order.
#[derive(Debug, Clone, Default)]
pub struct LabelMap {
    exact: BTreeMap<String, LabelTarget>,
    patterns: Vec<(Pattern, LabelTarget)>,
}

impl LabelMap {
    pub fn parse(text: &str, taxonomy: &Taxonomy) -> Result<Self> {
        let mut map = LabelMap::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (label, target) = line.split_once('\t').ok_or_else(|| {
                Error::invalid(alloc::format!("mapping line {}: expected label<TAB>target", lineno + 1))
            })?;
            let target = target.trim();
            let target = if target == "DROP" {
                LabelTarget::Drop
            } else {
                LabelTarget::Category(
                    taxonomy
                        .id(target)
                        .ok_or_else(|| Error::UnknownCategory(target.to_string()))?,
                )
            };
            map.insert(label, target);
        }
        Ok(map)
    }

    pub fn insert(&mut self, label: &str, target: LabelTarget) {
        let key = label.trim().to_lowercase();
        let lead = key.starts_with('*');
        let trail = key.ends_with('*') && key.len() > 1;
        let core = key.trim_matches('*').to_owned();
        match (lead, trail) {
            (false, false) => {
                self.exact.insert(key, target);
            }
            (true, true) => self.patterns.push((Pattern::Contains(core), target)),
            (true, false) => self.patterns.push((Pattern::Suffix(core), target)),
            (false, true) => self.patterns.push((Pattern::Prefix(core), target)),
        }
    }

    pub fn resolve(&self, raw: &str) -> Option<LabelTarget> {
        let key = raw.trim().to_lowercase();
        if let Some(t) = self.exact.get(&key) {
            return Some(*t);
        }
        self.patterns.iter().find(|(p, _)| p.matches(&key)).map(|(_, t)| *t)
    }

    /// Like [`resolve`](Self::resolve) but an unknown label is an error.
    pub fn resolve_strict(&self, raw: &str) -> Result<LabelTarget> {
        self.resolve(raw).ok_or_else(|| Error::UnmappedLabel(raw.to_string()))
    }

    pub fn len(&self) -> usize {
        self.exact.len() + self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

//! Check-in cleaning and grouping into (user, location) samples.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::rng::{domain, substream};
use crate::taxonomy::{CategoryId, LabelMap, LabelTarget};
use crate::time::Timestamp;

/// Repeat check-ins at the same venue within this many seconds are merged.
pub const MERGE_WINDOW_S: i64 = 3600;

/// A raw check-in as parsed from the source file.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckIn {
    pub user_id: String,
    pub venue_id: String,
    pub raw_category: String,
    pub geo: GeoPoint,
    pub time: Timestamp,
}

/// A check-in whose raw label has been resolved to a category.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabeledCheckIn {
    pub user_id: String,
    pub venue_id: String,
    pub subcategory: String,
    pub geo: GeoPoint,
    pub time: Timestamp,
    pub category: CategoryId,
}

/// All visits of one user to one location: the classification unit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UserLocationSample {
    pub user_id: String,
    pub location_id: String,
    pub geo: GeoPoint,
    /// Strictly increasing in UTC.
    pub visits: Vec<Timestamp>,
    pub category: CategoryId,
}

impl UserLocationSample {
    pub fn validate(&self, n_categories: usize) -> Result<()> {
        self.geo.validate()?;
        if self.visits.is_empty() {
            return Err(Error::invalid(alloc::format!(
                "sample ({}, {}) has no visits",
                self.user_id,
                self.location_id
            )));
        }
        if !self.visits.windows(2).all(|w| w[0].utc < w[1].utc) {
            return Err(Error::invalid(alloc::format!(
                "sample ({}, {}) visits are not strictly increasing",
                self.user_id,
                self.location_id
            )));
        }
        if self.category.index() >= n_categories {
            return Err(Error::UnknownCategory(alloc::format!("{}", self.category.0)));
        }
        Ok(())
    }
}

/// A categorized public point of interest.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Poi {
    pub id: String,
    pub geo: GeoPoint,
    pub category: CategoryId,
    pub subcategory: String,
}

/// Resolves raw labels; returns surviving check-ins and the number dropped.
pub fn map_categories(checkins: Vec<CheckIn>, map: &LabelMap) -> Result<(Vec<LabeledCheckIn>, usize)> {
    let mut out = Vec::with_capacity(checkins.len());
    let mut dropped = 0;
    for c in checkins {
        match map.resolve_strict(&c.raw_category)? {
            LabelTarget::Drop => dropped += 1,
            LabelTarget::Category(category) => out.push(LabeledCheckIn {
                user_id: c.user_id,
                venue_id: c.venue_id,
                subcategory: c.raw_category,
                geo: c.geo,
                time: c.time,
                category,
            }),
        }
    }
    Ok((out, dropped))
}

/// Removes check-ins that follow the previous *retained* check-in of the same
/// user at the same venue by at most [`MERGE_WINDOW_S`] seconds.
///
/// Output is sorted by (user, time, venue). Returns the removed count.
pub fn merge_repeat_checkins(mut checkins: Vec<LabeledCheckIn>) -> (Vec<LabeledCheckIn>, usize) {
    checkins.sort_by(|a, b| {
        a.user_id
            .cmp(&b.user_id)
            .then(a.time.utc.cmp(&b.time.utc))
            .then(a.venue_id.cmp(&b.venue_id))
    });
    let before = checkins.len();
    let mut anchors: BTreeMap<(String, String), i64> = BTreeMap::new();
    let mut kept = Vec::with_capacity(before);
    for c in checkins {
        let key = (c.user_id.clone(), c.venue_id.clone());
        match anchors.get(&key) {
            Some(&anchor) if c.time.utc - anchor <= MERGE_WINDOW_S => continue,
            _ => {
                anchors.insert(key, c.time.utc);
                kept.push(c);
            }
        }
    }
    let removed = before - kept.len();
    (kept, removed)
}

/// One sample per distinct (user, venue), ordered by (user, venue).
///
/// Expects merged input; a repeated timestamp at the same venue is an error.
pub fn group_to_samples(checkins: &[LabeledCheckIn]) -> Result<Vec<UserLocationSample>> {
    let mut groups: BTreeMap<(&str, &str), UserLocationSample> = BTreeMap::new();
    for c in checkins {
        groups
            .entry((c.user_id.as_str(), c.venue_id.as_str()))
            .or_insert_with(|| UserLocationSample {
                user_id: c.user_id.clone(),
                location_id: c.venue_id.clone(),
                geo: c.geo,
                visits: Vec::new(),
                category: c.category,
            })
            .visits
            .push(c.time);
    }
    let mut samples: Vec<UserLocationSample> = groups.into_values().collect();
    for s in &mut samples {
        s.visits.sort();
        if s.visits.windows(2).any(|w| w[0].utc == w[1].utc) {
            return Err(Error::invalid(alloc::format!(
                "duplicate visit time for ({}, {}); merge repeat check-ins first",
                s.user_id,
                s.location_id
            )));
        }
    }
    Ok(samples)
}

/// The distinct venues of a check-in set, ordered by venue id.
pub fn pois_from_checkins(checkins: &[LabeledCheckIn]) -> Vec<Poi> {
    let mut venues: BTreeMap<&str, Poi> = BTreeMap::new();
    for c in checkins {
        venues.entry(c.venue_id.as_str()).or_insert_with(|| Poi {
            id: c.venue_id.clone(),
            geo: c.geo,
            category: c.category,
            subcategory: c.subcategory.clone(),
        });
    }
    venues.into_values().collect()
}

/// `floor(fraction * n)` POIs drawn without replacement, original order kept.
pub fn subsample_pois(pois: &[Poi], fraction: f64, seed: u64) -> Result<Vec<Poi>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(alloc::format!(
            "POI fraction must be in (0, 1], got {fraction}"
        )));
    }
    if fraction == 1.0 {
        return Ok(pois.to_vec());
    }
    let amount = libm::floor(fraction * pois.len() as f64) as usize;
    let mut rng = substream(seed, domain::SUBSAMPLE, 0);
    let mut picked = index::sample(&mut rng, pois.len(), amount).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| pois[i].clone()).collect())
}

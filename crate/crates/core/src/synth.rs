//! Synthetic cities with known categories, for tests and calibration runs.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Gamma, Geometric, Normal};

use crate::dataset::{LabeledCheckIn, Poi};
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, LocalPoint, Projection};
use crate::rng::{domain, substream};
use crate::taxonomy::{CategoryId, Taxonomy};
use crate::time::Timestamp;

/// Monday 2012-04-02 00:00 UTC.
pub const DEFAULT_START_UTC: i64 = 1_333_324_800;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CategorySpec {
    pub label: String,
    pub share: f64,
    /// Local hour around which visits concentrate.
    pub peak_hour: f64,
    /// Probability that a visit falls on a weekend day.
    pub weekend_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Clustering {
    /// Standard deviation of each Gaussian blob, per axis.
    pub cluster_radius_m: f64,
    pub clusters_per_category: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthSpec {
    pub anchor: GeoPoint,
    /// Side of the square region.
    pub region_km: f64,
    pub categories: Vec<CategorySpec>,
    pub n_pois: usize,
    pub clustering: Option<Clustering>,
    pub n_users: usize,
    /// Inclusive range of distinct locations per user.
    pub locations_per_user: (usize, usize),
    pub mean_visits_per_location: f64,
    pub temporal_signal: bool,
    /// Spread of visit hours around the category peak.
    pub hour_sd: f64,
    /// Gamma shape of per-user category preferences; small values make users distinctive.
    pub preference_shape: f64,
    pub start_utc: i64,
    pub days: u32,
    pub seed: u64,
}

impl SynthSpec {
    /// Equal shares over `labels`, peaks spread from 8:00 to 23:00.
    pub fn uniform<S: AsRef<str>>(labels: &[S], seed: u64) -> Self {
        let n = labels.len();
        let categories = labels
            .iter()
            .enumerate()
            .map(|(i, l)| CategorySpec {
                label: l.as_ref().into(),
                share: 1.0 / n as f64,
                peak_hour: if n > 1 {
                    8.0 + 15.0 * i as f64 / (n - 1) as f64
                } else {
                    12.0
                },
                weekend_prob: if i % 2 == 0 { 0.15 } else { 0.6 },
            })
            .collect();
        SynthSpec {
            anchor: GeoPoint {
                lat: 40.73,
                lon: -73.99,
            },
            region_km: 4.0,
            categories,
            n_pois: 2000,
            clustering: None,
            n_users: 200,
            locations_per_user: (3, 10),
            mean_visits_per_location: 2.0,
            temporal_signal: true,
            hour_sd: 2.0,
            preference_shape: 0.5,
            start_utc: DEFAULT_START_UTC,
            days: 84,
            seed,
        }
    }

    pub fn with_clustering(mut self, cluster_radius_m: f64, clusters_per_category: usize) -> Self {
        self.clustering = Some(Clustering {
            cluster_radius_m,
            clusters_per_category,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.anchor.validate()?;
        if self.categories.is_empty() {
            return Err(Error::invalid("synthetic city needs categories"));
        }
        let total: f64 = self.categories.iter().map(|c| c.share).sum();
        if (total - 1.0).abs() > 1e-9 || self.categories.iter().any(|c| !(c.share >= 0.0)) {
            return Err(Error::invalid("category shares must be non-negative and sum to 1"));
        }
        if self.categories.iter().any(|c| !(0.0..=1.0).contains(&c.weekend_prob)) {
            return Err(Error::invalid("weekend probability must lie in [0, 1]"));
        }
        let (lo, hi) = self.locations_per_user;
        if self.n_pois == 0 || self.n_users == 0 || lo == 0 || hi < lo || self.days < 7 {
            return Err(Error::invalid("synthetic counts must be positive and cover a week"));
        }
        if !(self.region_km > 0.0
            && self.mean_visits_per_location >= 1.0
            && self.hour_sd > 0.0
            && self.preference_shape > 0.0)
        {
            return Err(Error::invalid(
                "region, visits per location, hour spread and preference shape must be positive",
            ));
        }
        if let Some(c) = self.clustering {
            if !(c.cluster_radius_m > 0.0) || c.clusters_per_category == 0 {
                return Err(Error::invalid("clustering needs a positive radius and cluster count"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthCity {
    pub taxonomy: Taxonomy,
    pub pois: Vec<Poi>,
    /// Every check-in sits exactly on a POI.
    pub checkins: Vec<LabeledCheckIn>,
}

/// Generates POIs, then users who pick POIs by category preference and visit
/// them at category-typical times.
pub fn generate(spec: &SynthSpec) -> Result<SynthCity> {
    spec.validate()?;
    let taxonomy = Taxonomy::new(spec.categories.iter().map(|c| c.label.as_str()))?;
    let projection = Projection::new(spec.anchor)?;
    let side = spec.region_km * 1000.0;
    let k = spec.categories.len();
    let mut rng = substream(spec.seed, domain::SYNTH, 0);

    let centers: Vec<Vec<LocalPoint>> = match spec.clustering {
        Some(c) => (0..k)
            .map(|_| {
                (0..c.clusters_per_category)
                    .map(|_| uniform_point(&mut rng, side))
                    .collect()
            })
            .collect(),
        None => Vec::new(),
    };
    let counts = apportion(spec.n_pois, &spec.categories);
    let mut pois = Vec::with_capacity(spec.n_pois);
    let mut by_category: Vec<Vec<usize>> = alloc::vec![Vec::new(); k];
    for (c, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            let pt = match spec.clustering {
                Some(cl) => {
                    let blob = Normal::new(0.0, cl.cluster_radius_m).expect("positive sd");
                    let centre = centers[c][rng.random_range(0..centers[c].len())];
                    centre.offset(blob.sample(&mut rng), blob.sample(&mut rng))
                }
                None => uniform_point(&mut rng, side),
            };
            by_category[c].push(pois.len());
            pois.push(Poi {
                id: alloc::format!("p{:06}", pois.len()),
                geo: projection.unproject(&pt),
                category: CategoryId(c as u16),
                subcategory: spec.categories[c].label.clone(),
            });
        }
    }

    let pref_dist = Gamma::new(spec.preference_shape, 1.0).expect("positive shape");
    let visits_dist = Geometric::new(1.0 / spec.mean_visits_per_location).expect("probability in (0, 1]");
    let hour_noise = Normal::new(0.0, spec.hour_sd).expect("positive sd");
    let weeks = (spec.days / 7) as i64;
    let mut checkins = Vec::new();
    for u in 0..spec.n_users {
        let user_id = alloc::format!("u{u:05}");
        let weights: Vec<f64> = (0..k)
            .map(|c| {
                if by_category[c].is_empty() {
                    0.0
                } else {
                    spec.categories[c].share * pref_dist.sample(&mut rng).max(1e-12)
                }
            })
            .collect();
        let pick = WeightedIndex::new(&weights).map_err(|_| Error::invalid("no category can be visited"))?;
        let n_locations = rng.random_range(spec.locations_per_user.0..=spec.locations_per_user.1);
        let mut used = BTreeSet::new();
        for _ in 0..n_locations {
            let mut chosen = None;
            for _ in 0..20 {
                let c = pick.sample(&mut rng);
                let p = by_category[c][rng.random_range(0..by_category[c].len())];
                if used.insert(p) {
                    chosen = Some(p);
                    break;
                }
            }
            let Some(p) = chosen else { continue };
            let cat = &spec.categories[pois[p].category.index()];
            let n_visits = 1 + visits_dist.sample(&mut rng);
            for _ in 0..n_visits {
                let (weekend, hour) = if spec.temporal_signal {
                    let h = (cat.peak_hour + hour_noise.sample(&mut rng)) % 24.0;
                    let h = if h < 0.0 { h + 24.0 } else { h };
                    (rng.random_bool(cat.weekend_prob), h)
                } else {
                    (rng.random_range(0..7) >= 5, rng.random_range(0.0..24.0))
                };
                let day = if weekend {
                    rng.random_range(5..7)
                } else {
                    rng.random_range(0..5)
                };
                let week = rng.random_range(0..weeks);
                let utc = spec.start_utc + (week * 7 + day) * 86_400 + (hour * 3600.0) as i64;
                checkins.push(LabeledCheckIn {
                    user_id: user_id.clone(),
                    venue_id: pois[p].id.clone(),
                    subcategory: pois[p].subcategory.clone(),
                    geo: pois[p].geo,
                    time: Timestamp::new(utc, 0),
                    category: pois[p].category,
                });
            }
        }
    }
    checkins.sort_by(|a, b| (&a.user_id, a.time.utc).cmp(&(&b.user_id, b.time.utc)));
    Ok(SynthCity {
        taxonomy,
        pois,
        checkins,
    })
}

fn uniform_point<R: Rng + ?Sized>(rng: &mut R, side: f64) -> LocalPoint {
    let h = side / 2.0;
    LocalPoint::new(rng.random_range(-h..h), rng.random_range(-h..h))
}

/// Largest-remainder split of `n` by share.
fn apportion(n: usize, cats: &[CategorySpec]) -> Vec<usize> {
    let raw: Vec<f64> = cats.iter().map(|c| c.share * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| *r as usize).collect();
    let mut order: Vec<usize> = (0..cats.len()).collect();
    order.sort_by(|&a, &b| {
        (raw[b] - counts[b] as f64)
            .total_cmp(&(raw[a] - counts[a] as f64))
            .then(a.cmp(&b))
    });
    let missing = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(missing) {
        counts[i] += 1;
    }
    counts
}

//! Location masking applied before spatial featurization.
//!
//! Points are displaced uniformly over a disc. Each sample draws from its own
//! stream keyed by `(seed, sample id)`, and the draw is scaled by the radius,
//! so a sample's displacement direction is shared across radius sweeps.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geo::LocalPoint;
use crate::index::SpatialIndex;
use crate::math;
use crate::rng::{domain, substream};

/// How to choose the masking radius.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "mode", rename_all = "snake_case"))]
pub enum MaskMode {
    None,
    Fixed { radius_m: f64 },
    ContextAware { m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObfuscationPolicy {
    pub mode: MaskMode,
    pub seed: u64,
}

impl ObfuscationPolicy {
    pub fn none() -> Self {
        ObfuscationPolicy {
            mode: MaskMode::None,
            seed: 0,
        }
    }

    pub fn fixed(radius_m: f64, seed: u64) -> Self {
        ObfuscationPolicy {
            mode: MaskMode::Fixed { radius_m },
            seed,
        }
    }

    pub fn context_aware(m: usize, seed: u64) -> Self {
        ObfuscationPolicy {
            mode: MaskMode::ContextAware { m },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            MaskMode::Fixed { radius_m } if !(radius_m >= 0.0 && radius_m.is_finite()) => {
                Err(Error::InvalidRadius(radius_m))
            }
            MaskMode::ContextAware { m: 0 } => Err(Error::invalid("context-aware masking needs m >= 1")),
            _ => Ok(()),
        }
    }
}

/// Uniform point on the disc of radius `radius` around `p`.
pub fn obfuscate_fixed<R: Rng + ?Sized>(p: &LocalPoint, radius: f64, rng: &mut R) -> LocalPoint {
    let u: f64 = rng.random();
    let theta = TAU * rng.random::<f64>();
    let d = radius * math::sqrt(u);
    p.offset(d * math::cos(theta), d * math::sin(theta))
}

/// Masks `p` with the radius that reaches its `m`-th nearest POI.
/// Returns the masked point and that radius.
pub fn obfuscate_context_aware<R: Rng + ?Sized>(
    p: &LocalPoint,
    pois: &SpatialIndex,
    m: usize,
    rng: &mut R,
) -> Result<(LocalPoint, f64)> {
    let r = mth_nearest_distance(p, pois, m)?;
    Ok((obfuscate_fixed(p, r, rng), r))
}

fn mth_nearest_distance(p: &LocalPoint, pois: &SpatialIndex, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    if pois.len() < m {
        return Err(Error::TooFewPois {
            needed: m,
            available: pois.len(),
        });
    }
    Ok(pois.knn(p, m)[m - 1].distance)
}

/// A masked sample position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Masked {
    pub point: LocalPoint,
    pub radius_used: f64,
}

/// Masks every point; `ids[i]` keys the random stream of `points[i]`.
pub fn obfuscate_all(
    points: &[LocalPoint],
    ids: impl IntoIterator<Item = u64>,
    policy: &ObfuscationPolicy,
    pois: &SpatialIndex,
) -> Result<Vec<Masked>> {
    policy.validate()?;
    points
        .iter()
        .zip(ids)
        .map(|(p, id)| {
            let mut rng = substream(policy.seed, domain::OBFUSCATION, id);
            Ok(match policy.mode {
                MaskMode::None => Masked {
                    point: *p,
                    radius_used: 0.0,
                },
                MaskMode::Fixed { radius_m } => Masked {
                    point: obfuscate_fixed(p, radius_m, &mut rng),
                    radius_used: radius_m,
                },
                MaskMode::ContextAware { m } => {
                    let (point, radius_used) = obfuscate_context_aware(p, pois, m, &mut rng)?;
                    Masked { point, radius_used }
                }
            })
        })
        .collect()
}

/// Outcome of [`tune_m`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunedM {
    pub m: usize,
    pub mean_radius: f64,
    /// False when even `m = |POIs|` stays below the target.
    pub reached: bool,
}

/// Mean distance from each query to its `m`-th nearest POI.
pub fn mean_mth_distance(pois: &SpatialIndex, queries: &[LocalPoint], m: usize) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::invalid("no query points"));
    }
    let mut sum = 0.0;
    for q in queries {
        sum += mth_nearest_distance(q, pois, m)?;
    }
    Ok(sum / queries.len() as f64)
}

/// Smallest `m` whose mean `m`-th-nearest-POI distance over `queries` reaches
/// `target_m` meters.
pub fn tune_m(pois: &SpatialIndex, queries: &[LocalPoint], target_m: f64) -> Result<TunedM> {
    if !(target_m > 0.0) {
        return Err(Error::InvalidRadius(target_m));
    }
    // The mean is non-decreasing in m, so bisect.
    let (mut lo, mut hi) = (1usize, pois.len());
    let top = mean_mth_distance(pois, queries, hi)?;
    if top < target_m {
        return Ok(TunedM {
            m: hi,
            mean_radius: top,
            reached: false,
        });
    }
    let mut hi_mean = top;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let mean = mean_mth_distance(pois, queries, mid)?;
        if mean >= target_m {
            hi = mid;
            hi_mean = mean;
        } else {
            lo = mid + 1;
        }
    }
    Ok(TunedM {
        m: hi,
        mean_radius: hi_mean,
        reached: true,
    })
}

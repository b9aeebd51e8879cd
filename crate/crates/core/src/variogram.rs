//! Binned fraction of POI pairs with differing categories versus distance.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geo::LocalPoint;
use crate::rng::{domain, substream};
use crate::taxonomy::CategoryId;

/// Pair draws per random substream.
pub const CHUNK_DRAWS: u64 = 1 << 16;

/// Square window centred on `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Subregion {
    pub center: LocalPoint,
    pub side_m: f64,
}

impl Subregion {
    pub fn contains(&self, p: &LocalPoint) -> bool {
        let h = self.side_m / 2.0;
        (p.x - self.center.x).abs() <= h && (p.y - self.center.y).abs() <= h
    }
}

/// 0, 25, 50, 100, ..., 6400 m.
pub fn doubling_edges() -> Vec<f64> {
    let mut e = alloc::vec![0.0, 25.0];
    while e[e.len() - 1] < 6400.0 {
        e.push(e[e.len() - 1] * 2.0);
    }
    e
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VariogramBin {
    pub lo: f64,
    pub hi: f64,
    /// `None` when no sampled pair fell in the bin.
    pub gamma: Option<f64>,
    pub n_pairs: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VariogramResult {
    pub bins: Vec<VariogramBin>,
    pub subregion: Option<Subregion>,
    /// POIs inside the subregion.
    pub n_points: usize,
    pub n_draws: u64,
    pub seed: u64,
}

/// Mergeable per-bin counters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariogramAccumulator {
    pub pairs: Vec<u64>,
    pub different: Vec<u64>,
}

impl VariogramAccumulator {
    pub fn new(n_bins: usize) -> Self {
        VariogramAccumulator {
            pairs: alloc::vec![0; n_bins],
            different: alloc::vec![0; n_bins],
        }
    }

    pub fn merge(&mut self, other: &VariogramAccumulator) {
        for (a, b) in self.pairs.iter_mut().zip(&other.pairs) {
            *a += b;
        }
        for (a, b) in self.different.iter_mut().zip(&other.different) {
            *a += b;
        }
    }
}

/// Bin of distance `d`: the first bin is `[e0, e1]`, later ones `(e_i, e_i+1]`.
pub fn bin_of(edges: &[f64], d: f64) -> Option<usize> {
    if d < edges[0] || d > edges[edges.len() - 1] {
        return None;
    }
    Some(edges.partition_point(|&e| e < d).saturating_sub(1))
}

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 || !edges.windows(2).all(|w| w[0] < w[1]) || edges[0] < 0.0 {
        return Err(Error::invalid(
            "variogram bins must be non-negative and strictly ascending",
        ));
    }
    Ok(())
}

/// Samples `n_draws` uniform pairs of distinct points using substream `chunk`.
pub fn accumulate_chunk(
    points: &[LocalPoint],
    categories: &[CategoryId],
    edges: &[f64],
    seed: u64,
    chunk: u64,
    n_draws: u64,
) -> VariogramAccumulator {
    let mut acc = VariogramAccumulator::new(edges.len() - 1);
    let mut rng = substream(seed, domain::VARIOGRAM, chunk);
    let n = points.len();
    for _ in 0..n_draws {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        if let Some(b) = bin_of(edges, points[i].distance(&points[j])) {
            acc.pairs[b] += 1;
            acc.different[b] += u64::from(categories[i] != categories[j]);
        }
    }
    acc
}

/// Points and categories inside the subregion, after validating the bins.
pub fn prepare(
    points: &[LocalPoint],
    categories: &[CategoryId],
    subregion: Option<Subregion>,
    edges: &[f64],
) -> Result<(Vec<LocalPoint>, Vec<CategoryId>)> {
    check_edges(edges)?;
    if points.len() != categories.len() {
        return Err(Error::DimensionMismatch {
            left: points.len(),
            right: categories.len(),
        });
    }
    let (pts, cats): (Vec<LocalPoint>, Vec<CategoryId>) = points
        .iter()
        .zip(categories)
        .filter(|(p, _)| subregion.is_none_or(|s| s.contains(p)))
        .map(|(p, c)| (*p, *c))
        .unzip();
    if pts.len() < 2 {
        return Err(Error::TooFewPois {
            needed: 2,
            available: pts.len(),
        });
    }
    Ok((pts, cats))
}

/// Number of draws in each chunk.
pub fn chunk_sizes(n_draws: u64) -> Vec<u64> {
    let full = n_draws / CHUNK_DRAWS;
    let mut v = alloc::vec![CHUNK_DRAWS; full as usize];
    if !n_draws.is_multiple_of(CHUNK_DRAWS) {
        v.push(n_draws % CHUNK_DRAWS);
    }
    v
}

pub fn finish(
    acc: &VariogramAccumulator,
    edges: &[f64],
    subregion: Option<Subregion>,
    n_points: usize,
    n_draws: u64,
    seed: u64,
) -> VariogramResult {
    let bins = (0..edges.len() - 1)
        .map(|b| VariogramBin {
            lo: edges[b],
            hi: edges[b + 1],
            gamma: (acc.pairs[b] > 0).then(|| acc.different[b] as f64 / acc.pairs[b] as f64),
            n_pairs: acc.pairs[b],
        })
        .collect();
    VariogramResult {
        bins,
        subregion,
        n_points,
        n_draws,
        seed,
    }
}

/// Sequential semivariogram. Chunks may also be run in parallel with
/// [`accumulate_chunk`] and merged; the result is the same.
pub fn semivariogram(
    points: &[LocalPoint],
    categories: &[CategoryId],
    subregion: Option<Subregion>,
    n_draws: u64,
    edges: &[f64],
    seed: u64,
) -> Result<VariogramResult> {
    let (pts, cats) = prepare(points, categories, subregion, edges)?;
    let mut acc = VariogramAccumulator::new(edges.len() - 1);
    for (chunk, &draws) in chunk_sizes(n_draws).iter().enumerate() {
        acc.merge(&accumulate_chunk(&pts, &cats, edges, seed, chunk as u64, draws));
    }
    Ok(finish(&acc, edges, subregion, pts.len(), n_draws, seed))
}

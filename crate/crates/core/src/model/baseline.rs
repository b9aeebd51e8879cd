use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geo::LocalPoint;
use crate::index::SpatialIndex;
use crate::taxonomy::CategoryId;

/// Uninformed attacker: draws labels from the training class frequencies.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassFrequencyBaseline {
    probs: Vec<f64>,
}

impl ClassFrequencyBaseline {
    pub fn fit(labels: &[CategoryId], n_classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("no training labels"));
        }
        let mut counts = alloc::vec![0usize; n_classes];
        for l in labels {
            *counts
                .get_mut(l.index())
                .ok_or_else(|| Error::UnknownCategory(alloc::format!("{}", l.0)))? += 1;
        }
        let n = labels.len() as f64;
        Ok(ClassFrequencyBaseline {
            probs: counts.iter().map(|&c| c as f64 / n).collect(),
        })
    }

    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("class probabilities must be non-negative and sum to 1"));
        }
        Ok(ClassFrequencyBaseline { probs })
    }

    /// Constant soft prediction.
    pub fn proba(&self) -> &[f64] {
        &self.probs
    }

    /// `n` i.i.d. categorical draws.
    pub fn predict<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<CategoryId> {
        let dist = WeightedIndex::new(&self.probs).expect("probabilities validated at construction");
        (0..n).map(|_| CategoryId(dist.sample(rng) as u16)).collect()
    }

    /// Accuracy expected against labels with the same distribution: sum of f_i^2.
    pub fn expected_accuracy(&self) -> f64 {
        self.probs.iter().map(|p| p * p).sum()
    }
}

/// Category of the nearest POI; equidistant POIs resolve to the lowest id.
pub fn spatial_join_predict(q: &LocalPoint, pois: &SpatialIndex, poi_categories: &[CategoryId]) -> CategoryId {
    poi_categories[pois.nearest(q).id]
}

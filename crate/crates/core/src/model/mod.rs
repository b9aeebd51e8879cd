//! Attack classifiers: the gradient-boosted tree ensemble and two baselines.

mod baseline;
mod gbdt;

pub use baseline::{spatial_join_predict, ClassFrequencyBaseline};
pub use gbdt::{GbdtModel, GbdtParams, Node, Tree};

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::taxonomy::CategoryId;

/// Row-major per-class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbaMatrix {
    n_classes: usize,
    data: Vec<f64>,
}

impl ProbaMatrix {
    pub fn new(n_classes: usize, data: Vec<f64>) -> Result<Self> {
        if n_classes == 0 || !data.len().is_multiple_of(n_classes) {
            return Err(Error::DimensionMismatch {
                left: data.len(),
                right: n_classes,
            });
        }
        Ok(ProbaMatrix { n_classes, data })
    }

    pub fn with_capacity(n_classes: usize, rows: usize) -> Self {
        ProbaMatrix {
            n_classes,
            data: Vec::with_capacity(n_classes * rows),
        }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.n_classes);
        self.data.extend_from_slice(row);
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_classes)
    }

    /// Hard labels; ties go to the lowest class index.
    pub fn argmax(&self) -> Vec<CategoryId> {
        self.rows().map(argmax).collect()
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(row: &[f64]) -> CategoryId {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    CategoryId(best as u16)
}

/// Numerically stable softmax written into `out`.
pub fn softmax_into(scores: &[f64], out: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = crate::math::exp(s - max);
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

//! Multiclass gradient boosting with second-order (Newton) leaf weights.
//!
//! Each round fits one regression tree per class to the softmax log-loss
//! gradient `g = p - 1{y = c}` with hessian `h = p (1 - p)`. Splits are exact
//! and greedy over every feature: rows are presorted once per feature and the
//! sorted lists are partitioned in place as the tree grows, so a level costs
//! O(rows x features).
//!
//! Split gain is `0.5 [G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)]` and a leaf
//! predicts `-eta G/(H+l)`. Equal gains keep the lowest feature index, then
//! the lowest threshold.

use alloc::vec::Vec;

use super::{softmax_into, ProbaMatrix};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureSchema};
use crate::math;
use crate::taxonomy::CategoryId;

const MIN_HESSIAN: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct GbdtParams {
    pub learning_rate: f64,
    pub n_rounds: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    pub min_split_gain: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            learning_rate: 0.3,
            n_rounds: 100,
            max_depth: 10,
            min_samples_leaf: 5,
            lambda: 1.0,
            min_split_gain: 0.0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.lambda >= 0.0) || self.min_samples_leaf == 0 {
            return Err(Error::invalid(
                "gbdt needs learning_rate > 0, lambda >= 0 and min_samples_leaf >= 1",
            ));
        }
        if !(self.min_split_gain >= 0.0) {
            return Err(Error::invalid("min_split_gain must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: u32,
        threshold: f64,
        gain: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Node 0 is the root.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if row[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// A fitted ensemble. Immutable; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GbdtModel {
    schema: FeatureSchema,
    n_classes: usize,
    params: GbdtParams,
    /// `rounds[r][c]` is the tree for class `c` in round `r`.
    rounds: Vec<Vec<Tree>>,
}

impl GbdtModel {
    pub fn train(x: &FeatureMatrix, y: &[CategoryId], n_classes: usize, params: &GbdtParams) -> Result<Self> {
        Ok(Self::train_with_trace(x, y, n_classes, params)?.0)
    }

    /// Also returns the training log-loss before the first round and after
    /// every round (`n_rounds + 1` values).
    pub fn train_with_trace(
        x: &FeatureMatrix,
        y: &[CategoryId],
        n_classes: usize,
        params: &GbdtParams,
    ) -> Result<(Self, Vec<f64>)> {
        params.validate()?;
        validate_training_set(x, y, n_classes)?;
        let n = x.n_rows();
        let n_features = x.n_cols();

        let columns: Vec<Vec<f64>> = (0..n_features).map(|f| x.column(f).collect()).collect();
        let presorted: Vec<Vec<u32>> = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();

        let mut scores = alloc::vec![0.0; n * n_classes];
        let mut probs = alloc::vec![0.0; n * n_classes];
        let mut grad = alloc::vec![0.0; n];
        let mut hess = alloc::vec![0.0; n];
        let mut deltas = alloc::vec![0.0; n * n_classes];
        let mut builder = TreeBuilder::new(&columns, &presorted, params);
        let mut rounds = Vec::with_capacity(params.n_rounds);

        refresh_probs(&scores, &mut probs, n_classes);
        let mut trace = Vec::with_capacity(params.n_rounds + 1);
        trace.push(log_loss(&probs, y, n_classes));

        for _ in 0..params.n_rounds {
            let mut trees = Vec::with_capacity(n_classes);
            for c in 0..n_classes {
                for i in 0..n {
                    let p = probs[i * n_classes + c];
                    let target = if y[i].index() == c { 1.0 } else { 0.0 };
                    grad[i] = p - target;
                    hess[i] = (p * (1.0 - p)).max(MIN_HESSIAN);
                }
                let tree = builder.build(&grad, &hess);
                for i in 0..n {
                    deltas[i * n_classes + c] = builder.row_value[i];
                }
                trees.push(tree);
            }
            for (s, d) in scores.iter_mut().zip(&deltas) {
                *s += d;
            }
            refresh_probs(&scores, &mut probs, n_classes);
            trace.push(log_loss(&probs, y, n_classes));
            rounds.push(trees);
        }

        Ok((
            GbdtModel {
                schema: x.schema().clone(),
                n_classes,
                params: *params,
                rounds,
            },
            trace,
        ))
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn params(&self) -> &GbdtParams {
        &self.params
    }

    pub fn rounds(&self) -> &[Vec<Tree>] {
        &self.rounds
    }

    /// Raw additive class scores for one row.
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        let mut s = alloc::vec![0.0; self.n_classes];
        for trees in &self.rounds {
            for (c, t) in trees.iter().enumerate() {
                s[c] += t.predict(row);
            }
        }
        s
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<ProbaMatrix> {
        if x.schema() != &self.schema {
            return Err(Error::SchemaMismatch(alloc::format!(
                "model expects {} columns {:?}.., got {} columns",
                self.schema.len(),
                self.schema.columns.first(),
                x.n_cols()
            )));
        }
        if let Some((row, column)) = x.find_non_finite() {
            return Err(Error::NonFinite { row, column });
        }
        let mut out = ProbaMatrix::with_capacity(self.n_classes, x.n_rows());
        let mut p = alloc::vec![0.0; self.n_classes];
        for i in 0..x.n_rows() {
            softmax_into(&self.scores(x.row(i)), &mut p);
            out.push_row(&p);
        }
        Ok(out)
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<CategoryId>> {
        Ok(self.predict_proba(x)?.argmax())
    }
}

fn validate_training_set(x: &FeatureMatrix, y: &[CategoryId], n_classes: usize) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.n_rows(),
            right: y.len(),
        });
    }
    if x.n_rows() == 0 {
        return Err(Error::invalid("empty training set"));
    }
    if n_classes < 2 {
        return Err(Error::SingleClass);
    }
    if let Some(bad) = y.iter().find(|c| c.index() >= n_classes) {
        return Err(Error::UnknownCategory(alloc::format!("{}", bad.0)));
    }
    if y.iter().all(|c| *c == y[0]) {
        return Err(Error::SingleClass);
    }
    if let Some((row, column)) = x.find_non_finite() {
        return Err(Error::NonFinite { row, column });
    }
    Ok(())
}

fn refresh_probs(scores: &[f64], probs: &mut [f64], n_classes: usize) {
    for (s, p) in scores.chunks_exact(n_classes).zip(probs.chunks_exact_mut(n_classes)) {
        softmax_into(s, p);
    }
}

fn log_loss(probs: &[f64], y: &[CategoryId], n_classes: usize) -> f64 {
    let total: f64 = y
        .iter()
        .enumerate()
        .map(|(i, c)| -math::ln(probs[i * n_classes + c.index()].max(1e-300)))
        .sum();
    total / y.len() as f64
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
    n_left: usize,
}

struct TreeBuilder<'a> {
    columns: &'a [Vec<f64>],
    presorted: &'a [Vec<u32>],
    params: &'a GbdtParams,
    sorted: Vec<Vec<u32>>,
    go_left: Vec<bool>,
    scratch: Vec<u32>,
    /// Leaf value reached by every training row in the last built tree.
    row_value: Vec<f64>,
}

impl<'a> TreeBuilder<'a> {
    fn new(columns: &'a [Vec<f64>], presorted: &'a [Vec<u32>], params: &'a GbdtParams) -> Self {
        let n = presorted.first().map_or(0, |v| v.len());
        TreeBuilder {
            columns,
            presorted,
            params,
            sorted: presorted.to_vec(),
            go_left: alloc::vec![false; n],
            scratch: Vec::with_capacity(n),
            row_value: alloc::vec![0.0; n],
        }
    }

    fn build(&mut self, grad: &[f64], hess: &[f64]) -> Tree {
        for (dst, src) in self.sorted.iter_mut().zip(self.presorted) {
            dst.copy_from_slice(src);
        }
        let n = self.go_left.len();
        let mut nodes = Vec::new();
        self.grow(&mut nodes, grad, hess, 0, n, 0);
        Tree { nodes }
    }

    fn grow(
        &mut self,
        nodes: &mut Vec<Node>,
        grad: &[f64],
        hess: &[f64],
        start: usize,
        end: usize,
        depth: usize,
    ) -> u32 {
        let idx = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });

        let (mut g_sum, mut h_sum) = (0.0, 0.0);
        let rows = &self.sorted[0][start..end];
        for &r in rows {
            g_sum += grad[r as usize];
            h_sum += hess[r as usize];
        }

        let split = if depth < self.params.max_depth && end - start >= 2 * self.params.min_samples_leaf {
            self.best_split(grad, hess, start, end, g_sum, h_sum)
        } else {
            None
        };

        match split {
            Some(best) if best.gain > self.params.min_split_gain && best.gain > 0.0 => {
                for (i, &r) in self.sorted[best.feature][start..end].iter().enumerate() {
                    self.go_left[r as usize] = i < best.n_left;
                }
                for list in self.sorted.iter_mut() {
                    self.scratch.clear();
                    self.scratch
                        .extend(list[start..end].iter().filter(|&&r| self.go_left[r as usize]));
                    self.scratch
                        .extend(list[start..end].iter().filter(|&&r| !self.go_left[r as usize]));
                    list[start..end].copy_from_slice(&self.scratch);
                }
                let mid = start + best.n_left;
                let left = self.grow(nodes, grad, hess, start, mid, depth + 1);
                let right = self.grow(nodes, grad, hess, mid, end, depth + 1);
                nodes[idx] = Node::Split {
                    feature: best.feature as u32,
                    threshold: best.threshold,
                    gain: best.gain,
                    left,
                    right,
                };
            }
            _ => {
                let value = -self.params.learning_rate * g_sum / (h_sum + self.params.lambda);
                for &r in &self.sorted[0][start..end] {
                    self.row_value[r as usize] = value;
                }
                nodes[idx] = Node::Leaf { value };
            }
        }
        idx as u32
    }

    fn best_split(
        &self,
        grad: &[f64],
        hess: &[f64],
        start: usize,
        end: usize,
        g_sum: f64,
        h_sum: f64,
    ) -> Option<BestSplit> {
        let lambda = self.params.lambda;
        let min_leaf = self.params.min_samples_leaf;
        let parent = g_sum * g_sum / (h_sum + lambda);
        let len = end - start;
        let mut best: Option<BestSplit> = None;
        for (f, col) in self.columns.iter().enumerate() {
            let seg = &self.sorted[f][start..end];
            if col[seg[0] as usize] == col[seg[len - 1] as usize] {
                continue;
            }
            let (mut gl, mut hl) = (0.0, 0.0);
            for i in 0..len - 1 {
                let r = seg[i] as usize;
                gl += grad[r];
                hl += hess[r];
                let n_left = i + 1;
                if n_left < min_leaf {
                    continue;
                }
                if len - n_left < min_leaf {
                    break;
                }
                let v = col[r];
                let next = col[seg[i + 1] as usize];
                if v == next {
                    continue;
                }
                let (gr, hr) = (g_sum - gl, h_sum - hl);
                let gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent);
                let better = match &best {
                    None => true,
                    Some(b) => gain > b.gain + 1e-12 * b.gain.abs(),
                };
                if better {
                    let mut threshold = v + (next - v) * 0.5;
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        gain,
                        n_left,
                    });
                }
            }
        }
        best
    }
}

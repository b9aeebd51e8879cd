//! Cross-validation splits, scenario evaluation and categorization metrics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureMode};
use crate::geo::LocalPoint;
use crate::index::SpatialIndex;
use crate::model::{spatial_join_predict, ClassFrequencyBaseline, GbdtModel, GbdtParams, ProbaMatrix};
use crate::rng::{domain, substream};
use crate::taxonomy::CategoryId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SplitMode {
    UserCv,
    SpatialGrid,
}

/// Assignment of every sample to exactly one test fold.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub mode: SplitMode,
    pub fold_of: Vec<usize>,
    pub n_folds: usize,
    pub seed: u64,
}

impl SplitPlan {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = alloc::vec![0; self.n_folds];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }

    /// Largest over smallest non-empty fold.
    pub fn size_ratio(&self) -> f64 {
        let sizes: Vec<usize> = self.fold_sizes().into_iter().filter(|&s| s > 0).collect();
        let max = sizes.iter().copied().max().unwrap_or(0) as f64;
        let min = sizes.iter().copied().min().unwrap_or(1) as f64;
        max / min
    }
}

/// Users shuffled under `seed` and dealt round-robin into `k` folds; every
/// sample follows its user.
pub fn make_user_folds<S: AsRef<str>>(user_of_sample: &[S], k: usize, seed: u64) -> Result<SplitPlan> {
    if k == 0 {
        return Err(Error::invalid("need at least one fold"));
    }
    let users: BTreeSet<&str> = user_of_sample.iter().map(|u| u.as_ref()).collect();
    if users.len() < k {
        return Err(Error::TooFewUsers {
            users: users.len(),
            folds: k,
        });
    }
    let mut users: Vec<&str> = users.into_iter().collect();
    users.shuffle(&mut substream(seed, domain::FOLDS, 0));
    let fold_of_user: BTreeMap<&str, usize> = users.iter().enumerate().map(|(i, u)| (*u, i % k)).collect();
    Ok(SplitPlan {
        mode: SplitMode::UserCv,
        fold_of: user_of_sample.iter().map(|u| fold_of_user[u.as_ref()]).collect(),
        n_folds: k,
        seed,
    })
}

/// 3x3 grid with cuts at the empirical terciles of x and of y.
/// Fold index is `3 * x_band + y_band`.
pub fn make_spatial_folds(points: &[LocalPoint]) -> Result<SplitPlan> {
    if points.len() < 9 {
        return Err(Error::invalid("spatial split needs at least 9 samples"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    let xcuts = tercile_cuts(&xs, "x")?;
    let ycuts = tercile_cuts(&ys, "y")?;
    let band = |v: f64, cuts: &[f64; 2]| usize::from(v >= cuts[0]) + usize::from(v >= cuts[1]);
    Ok(SplitPlan {
        mode: SplitMode::SpatialGrid,
        fold_of: points
            .iter()
            .map(|p| 3 * band(p.x, &xcuts) + band(p.y, &ycuts))
            .collect(),
        n_folds: 9,
        seed: 0,
    })
}

fn tercile_cuts(values: &[f64], axis: &str) -> Result<[f64; 2]> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v[0] == v[v.len() - 1] {
        return Err(Error::DegenerateCoordinates(alloc::format!(
            "all {axis} coordinates are identical"
        )));
    }
    let n = v.len();
    Ok([v[n / 3], v[2 * n / 3]])
}

/// Attack scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scenario {
    Uninformed,
    SpatialJoin,
    GbdtTemporal,
    GbdtSpatial,
    GbdtSpatiotemporal,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Uninformed,
        Scenario::SpatialJoin,
        Scenario::GbdtTemporal,
        Scenario::GbdtSpatial,
        Scenario::GbdtSpatiotemporal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Uninformed => "uninformed",
            Scenario::SpatialJoin => "spatial_join",
            Scenario::GbdtTemporal => "gbdt_temporal",
            Scenario::GbdtSpatial => "gbdt_spatial",
            Scenario::GbdtSpatiotemporal => "gbdt_spatiotemporal",
        }
    }

    pub fn feature_mode(self) -> Option<FeatureMode> {
        match self {
            Scenario::GbdtTemporal => Some(FeatureMode::Temporal),
            Scenario::GbdtSpatial => Some(FeatureMode::Spatial),
            Scenario::GbdtSpatiotemporal => Some(FeatureMode::Spatiotemporal),
            _ => None,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .iter()
            .copied()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::invalid(alloc::format!("unknown scenario {s:?}")))
    }
}

/// Everything a scenario needs, borrowed from the prepared city.
#[derive(Clone, Copy)]
pub struct ScenarioInput<'a> {
    pub scenario: Scenario,
    pub n_classes: usize,
    pub labels: &'a [CategoryId],
    /// Required for the gbdt scenarios, with that scenario's columns.
    pub features: Option<&'a FeatureMatrix>,
    /// Masked sample positions, used by the spatial join.
    pub masked_points: &'a [LocalPoint],
    pub poi_index: &'a SpatialIndex,
    pub poi_categories: &'a [CategoryId],
    pub gbdt: &'a GbdtParams,
    pub seed: u64,
}

/// Test-fold predictions.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: usize,
    pub rows: Vec<usize>,
    pub proba: ProbaMatrix,
    pub predicted: Vec<CategoryId>,
}

/// Trains on every fold but `fold` and predicts `fold`. `None` for an empty fold.
pub fn run_fold(input: &ScenarioInput<'_>, plan: &SplitPlan, fold: usize) -> Result<Option<FoldOutcome>> {
    let test = plan.test_rows(fold);
    if test.is_empty() {
        return Ok(None);
    }
    if plan.fold_of.len() != input.labels.len() {
        return Err(Error::DimensionMismatch {
            left: plan.fold_of.len(),
            right: input.labels.len(),
        });
    }
    let train = plan.train_rows(fold);
    let train_labels: Vec<CategoryId> = train.iter().map(|&i| input.labels[i]).collect();
    let needs_training = input.scenario != Scenario::SpatialJoin;
    if needs_training && train_labels.iter().all(|c| Some(c) == train_labels.first()) {
        return Err(Error::SingleClass.in_fold(fold));
    }
    let k = input.n_classes;

    let (proba, predicted) = match input.scenario {
        Scenario::Uninformed => {
            let base = ClassFrequencyBaseline::fit(&train_labels, k).map_err(|e| e.in_fold(fold))?;
            let mut rng = substream(input.seed, domain::UNINFORMED, fold as u64);
            let predicted = base.predict(test.len(), &mut rng);
            let mut proba = ProbaMatrix::with_capacity(k, test.len());
            for _ in 0..test.len() {
                proba.push_row(base.proba());
            }
            (proba, predicted)
        }
        Scenario::SpatialJoin => {
            let mut proba = ProbaMatrix::with_capacity(k, test.len());
            let mut predicted = Vec::with_capacity(test.len());
            let mut row = alloc::vec![0.0; k];
            for &i in &test {
                let c = spatial_join_predict(&input.masked_points[i], input.poi_index, input.poi_categories);
                row.iter_mut().for_each(|v| *v = 0.0);
                row[c.index()] = 1.0;
                proba.push_row(&row);
                predicted.push(c);
            }
            (proba, predicted)
        }
        _ => {
            let x = input
                .features
                .ok_or_else(|| Error::invalid("gbdt scenario without features"))?;
            let model =
                GbdtModel::train(&x.select_rows(&train), &train_labels, k, input.gbdt).map_err(|e| e.in_fold(fold))?;
            let proba = model
                .predict_proba(&x.select_rows(&test))
                .map_err(|e| e.in_fold(fold))?;
            let predicted = proba.argmax();
            (proba, predicted)
        }
    };
    Ok(Some(FoldOutcome {
        fold,
        rows: test,
        proba,
        predicted,
    }))
}

/// Runs all folds sequentially and pools the test predictions.
pub fn run_scenario(input: &ScenarioInput<'_>, plan: &SplitPlan) -> Result<EvaluationReport> {
    let mut outcomes = Vec::new();
    for fold in 0..plan.n_folds {
        if let Some(o) = run_fold(input, plan, fold)? {
            outcomes.push(o);
        }
    }
    EvaluationReport::from_folds(input.scenario, input.labels, input.n_classes, outcomes)
}

/// Raw counts; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        ConfusionMatrix {
            n_classes,
            counts: alloc::vec![0; n_classes * n_classes],
        }
    }

    pub fn add(&mut self, truth: CategoryId, predicted: CategoryId) {
        self.counts[truth.index() * self.n_classes + predicted.index()] += 1;
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n_classes + predicted]
    }

    pub fn support(&self, truth: usize) -> u64 {
        (0..self.n_classes).map(|p| self.get(truth, p)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..self.n_classes).map(|c| self.get(c, c)).sum();
        diag as f64 / self.total() as f64
    }

    /// Recall per class; `None` for classes without support.
    pub fn sensitivity(&self) -> Vec<Option<f64>> {
        (0..self.n_classes)
            .map(|c| {
                let s = self.support(c);
                (s > 0).then(|| self.get(c, c) as f64 / s as f64)
            })
            .collect()
    }

    /// Row-normalized matrix; rows without support are all zero.
    pub fn normalized(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.counts.len()];
        for t in 0..self.n_classes {
            let s = self.support(t);
            if s > 0 {
                for p in 0..self.n_classes {
                    out[t * self.n_classes + p] = self.get(t, p) as f64 / s as f64;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FoldAccuracy {
    pub fold: usize,
    pub n: usize,
    pub accuracy: f64,
}

/// Metrics pooled over all test folds.
#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub scenario: Scenario,
    pub n_classes: usize,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub sensitivity: Vec<Option<f64>>,
    pub folds: Vec<FoldAccuracy>,
    /// Per-sample outputs, aligned with the input samples.
    pub predicted: Vec<CategoryId>,
    pub proba: ProbaMatrix,
    pub fold_of: Vec<usize>,
    pub truth: Vec<CategoryId>,
}

impl EvaluationReport {
    pub fn from_folds(
        scenario: Scenario,
        labels: &[CategoryId],
        n_classes: usize,
        outcomes: Vec<FoldOutcome>,
    ) -> Result<Self> {
        let n = labels.len();
        let mut predicted: Vec<Option<CategoryId>> = alloc::vec![None; n];
        let mut rows: Vec<Option<(usize, usize)>> = alloc::vec![None; n];
        let mut fold_of = alloc::vec![usize::MAX; n];
        let mut folds = Vec::new();
        for (oi, o) in outcomes.iter().enumerate() {
            let mut correct = 0;
            for (j, &i) in o.rows.iter().enumerate() {
                if predicted[i].is_some() {
                    return Err(Error::invalid(alloc::format!("sample {i} appears in two test folds")));
                }
                predicted[i] = Some(o.predicted[j]);
                rows[i] = Some((oi, j));
                fold_of[i] = o.fold;
                correct += usize::from(o.predicted[j] == labels[i]);
            }
            folds.push(FoldAccuracy {
                fold: o.fold,
                n: o.rows.len(),
                accuracy: correct as f64 / o.rows.len() as f64,
            });
        }
        let mut confusion = ConfusionMatrix::new(n_classes);
        let mut proba = ProbaMatrix::with_capacity(n_classes, n);
        let mut pred = Vec::with_capacity(n);
        for i in 0..n {
            let p = predicted[i].ok_or_else(|| Error::invalid(alloc::format!("sample {i} is in no test fold")))?;
            let (oi, j) = rows[i].expect("set together with predicted");
            confusion.add(labels[i], p);
            proba.push_row(outcomes[oi].proba.row(j));
            pred.push(p);
        }
        Ok(EvaluationReport {
            scenario,
            n_classes,
            accuracy: confusion.accuracy(),
            sensitivity: confusion.sensitivity(),
            confusion,
            folds,
            predicted: pred,
            proba,
            fold_of,
            truth: labels.to_vec(),
        })
    }

    pub fn correct(&self) -> Vec<bool> {
        self.predicted.iter().zip(&self.truth).map(|(p, t)| p == t).collect()
    }
}

/// Number of POIs within `radius` of each point.
pub fn poi_density(points: &[LocalPoint], pois: &SpatialIndex, radius: f64) -> Result<Vec<usize>> {
    points.iter().map(|p| pois.count_within(p, radius)).collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DensityBin {
    pub lo: usize,
    /// Exclusive; `None` for the open last bin.
    pub hi: Option<usize>,
    pub n: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DensityTable {
    /// Only bins that hold at least one sample.
    pub bins: Vec<DensityBin>,
    pub mean_density_correct: Option<f64>,
    pub mean_density_incorrect: Option<f64>,
}

/// Accuracy per POI-density bin. `edges` start at 0 and ascend; bin `i`
/// covers `[edges[i], edges[i+1])` and the last bin is open.
pub fn density_stratified_accuracy(correct: &[bool], density: &[usize], edges: &[usize]) -> Result<DensityTable> {
    if correct.len() != density.len() {
        return Err(Error::DimensionMismatch {
            left: correct.len(),
            right: density.len(),
        });
    }
    if edges.first() != Some(&0) || !edges.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid(
            "density edges must start at 0 and be strictly ascending",
        ));
    }
    let mut n = alloc::vec![0usize; edges.len()];
    let mut hits = alloc::vec![0usize; edges.len()];
    let (mut sum_ok, mut n_ok, mut sum_bad, mut n_bad) = (0.0, 0usize, 0.0, 0usize);
    for (&ok, &d) in correct.iter().zip(density) {
        let b = edges.partition_point(|&e| e <= d) - 1;
        n[b] += 1;
        if ok {
            hits[b] += 1;
            sum_ok += d as f64;
            n_ok += 1;
        } else {
            sum_bad += d as f64;
            n_bad += 1;
        }
    }
    let bins = (0..edges.len())
        .filter(|&b| n[b] > 0)
        .map(|b| DensityBin {
            lo: edges[b],
            hi: edges.get(b + 1).copied(),
            n: n[b],
            accuracy: hits[b] as f64 / n[b] as f64,
        })
        .collect();
    Ok(DensityTable {
        bins,
        mean_density_correct: (n_ok > 0).then(|| sum_ok / n_ok as f64),
        mean_density_incorrect: (n_bad > 0).then(|| sum_bad / n_bad as f64),
    })
}

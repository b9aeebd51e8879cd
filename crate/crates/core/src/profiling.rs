//! User profiles, profiling error, re-identification and privacy loss.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::UserLocationSample;
use crate::error::{Error, Result};
use crate::math;
use crate::model::ProbaMatrix;
use crate::taxonomy::CategoryId;

/// Added to profile distances before inversion.
pub const SIMILARITY_EPS: f64 = 1e-6;

/// Category-frequency vector of one user.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UserProfile {
    pub user_id: String,
    pub p: Vec<f64>,
    pub total_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ProfileMode {
    Hard,
    #[default]
    Soft,
}

/// How much each location counts towards a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Weighting {
    #[default]
    Visits,
    Locations,
}

impl Weighting {
    pub fn weight(self, sample: &UserLocationSample) -> f64 {
        match self {
            Weighting::Visits => sample.visits.len() as f64,
            Weighting::Locations => 1.0,
        }
    }
}

/// One prediction of a user's location.
#[derive(Debug, Clone, Copy)]
pub struct Prediction<'a> {
    pub weight: f64,
    pub label: CategoryId,
    pub proba: Option<&'a [f64]>,
}

fn normalized(user_id: &str, mut p: Vec<f64>, total: f64) -> Result<UserProfile> {
    if !(total > 0.0) {
        return Err(Error::invalid(alloc::format!("user {user_id} has no weight")));
    }
    p.iter_mut().for_each(|v| *v /= total);
    Ok(UserProfile {
        user_id: user_id.into(),
        p,
        total_weight: total,
    })
}

/// Weighted frequency of true categories; `locations` holds (category, weight).
pub fn true_profile(user_id: &str, locations: &[(CategoryId, f64)], n_classes: usize) -> Result<UserProfile> {
    let mut p = alloc::vec![0.0; n_classes];
    let mut total = 0.0;
    for &(c, w) in locations {
        if c.index() >= n_classes {
            return Err(Error::UnknownCategory(alloc::format!("{}", c.0)));
        }
        p[c.index()] += w;
        total += w;
    }
    normalized(user_id, p, total)
}

/// Hard: weighted frequency of predicted labels. Soft: weighted mean of proba rows.
pub fn predicted_profile(
    user_id: &str,
    predictions: &[Prediction<'_>],
    n_classes: usize,
    mode: ProfileMode,
) -> Result<UserProfile> {
    let mut p = alloc::vec![0.0; n_classes];
    let mut total = 0.0;
    for pr in predictions {
        match mode {
            ProfileMode::Hard => {
                if pr.label.index() >= n_classes {
                    return Err(Error::UnknownCategory(alloc::format!("{}", pr.label.0)));
                }
                p[pr.label.index()] += pr.weight;
            }
            ProfileMode::Soft => {
                let row = pr
                    .proba
                    .ok_or_else(|| Error::invalid("soft profiling needs probability rows"))?;
                if row.len() != n_classes {
                    return Err(Error::DimensionMismatch {
                        left: row.len(),
                        right: n_classes,
                    });
                }
                for (acc, v) in p.iter_mut().zip(row) {
                    *acc += pr.weight * v;
                }
            }
        }
        total += pr.weight;
    }
    normalized(user_id, p, total)
}

/// Euclidean distance between two profiles.
pub fn profiling_error(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(math::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()))
}

fn pool_lookup(pool: &[UserProfile]) -> BTreeMap<&str, usize> {
    pool.iter().enumerate().map(|(i, p)| (p.user_id.as_str(), i)).collect()
}

fn true_index(lookup: &BTreeMap<&str, usize>, user: &str) -> Result<usize> {
    lookup
        .get(user)
        .copied()
        .ok_or_else(|| Error::invalid(alloc::format!("user {user} is not in the pool")))
}

/// 1-based rank of each user's true profile among the pool, ordering pool
/// entries by (distance to the prediction, user id).
pub fn match_ranks(predicted: &[UserProfile], pool: &[UserProfile]) -> Result<Vec<usize>> {
    let lookup = pool_lookup(pool);
    predicted
        .iter()
        .map(|pred| {
            let t = true_index(&lookup, &pred.user_id)?;
            let dt = profiling_error(&pred.p, &pool[t].p)?;
            let mut rank = 1;
            for (i, q) in pool.iter().enumerate() {
                if i == t {
                    continue;
                }
                let d = profiling_error(&pred.p, &q.p)?;
                if d < dt || (d == dt && q.user_id < pool[t].user_id) {
                    rank += 1;
                }
            }
            Ok(rank)
        })
        .collect()
}

pub fn hit_at_k(ranks: &[usize], k: usize) -> f64 {
    ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64
}

/// Fraction of users whose true profile is among the `k` closest to their prediction.
pub fn reidentify(predicted: &[UserProfile], pool: &[UserProfile], k: usize) -> Result<f64> {
    Ok(hit_at_k(&match_ranks(predicted, pool)?, k))
}

/// `|U|` times the softmax weight of the true user, with inverse-distance similarities.
pub fn privacy_loss(predicted: &UserProfile, pool: &[UserProfile]) -> Result<f64> {
    if pool.len() < 2 {
        return Err(Error::invalid("privacy loss needs at least two users in the pool"));
    }
    let t = pool
        .iter()
        .position(|q| q.user_id == predicted.user_id)
        .ok_or_else(|| Error::invalid(alloc::format!("user {} is not in the pool", predicted.user_id)))?;
    privacy_loss_at(predicted, pool, t)
}

fn privacy_loss_at(predicted: &UserProfile, pool: &[UserProfile], t: usize) -> Result<f64> {
    let sims = pool
        .iter()
        .map(|q| Ok(1.0 / (profiling_error(&predicted.p, &q.p)? + SIMILARITY_EPS)))
        .collect::<Result<Vec<f64>>>()?;
    let max = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = sims.iter().map(|s| math::exp(s - max)).sum();
    Ok(pool.len() as f64 * math::exp(sims[t] - max) / denom)
}

/// Re-identification and privacy loss over one pool.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PrivacyLossReport {
    /// (user id, PL), in the order of the predicted profiles.
    pub per_user: Vec<(String, f64)>,
    pub median: f64,
    /// (PL, fraction of users with PL at most this value), ascending.
    pub cdf: Vec<(f64, f64)>,
    pub hit_at_1: f64,
    pub hit_at_5: f64,
    pub mean_profiling_error: f64,
}

pub fn evaluate_profiles(predicted: &[UserProfile], pool: &[UserProfile]) -> Result<PrivacyLossReport> {
    if predicted.is_empty() {
        return Err(Error::invalid("no predicted profiles"));
    }
    let lookup = pool_lookup(pool);
    let ranks = match_ranks(predicted, pool)?;
    let mut per_user = Vec::with_capacity(predicted.len());
    let mut err_sum = 0.0;
    for pred in predicted {
        let t = true_index(&lookup, &pred.user_id)?;
        err_sum += profiling_error(&pred.p, &pool[t].p)?;
        per_user.push((pred.user_id.clone(), privacy_loss_at(pred, pool, t)?));
    }
    let mut values: Vec<f64> = per_user.iter().map(|(_, v)| *v).collect();
    let median = math::median(&values).expect("non-empty");
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let cdf = values
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, (i + 1) as f64 / n))
        .collect();
    Ok(PrivacyLossReport {
        per_user,
        median,
        cdf,
        hit_at_1: hit_at_k(&ranks, 1),
        hit_at_5: hit_at_k(&ranks, 5),
        mean_profiling_error: err_sum / n,
    })
}

/// True and predicted profiles for every user in `samples`, sorted by user id.
/// `predicted` and `proba` are aligned with `samples`.
pub fn build_profiles(
    samples: &[UserLocationSample],
    predicted: &[CategoryId],
    proba: Option<&ProbaMatrix>,
    n_classes: usize,
    mode: ProfileMode,
    weighting: Weighting,
) -> Result<(Vec<UserProfile>, Vec<UserProfile>)> {
    if predicted.len() != samples.len() {
        return Err(Error::DimensionMismatch {
            left: predicted.len(),
            right: samples.len(),
        });
    }
    if let Some(p) = proba {
        if p.n_rows() != samples.len() {
            return Err(Error::DimensionMismatch {
                left: p.n_rows(),
                right: samples.len(),
            });
        }
    }
    let mut by_user: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        by_user.entry(&s.user_id).or_default().push(i);
    }
    let mut truth = Vec::with_capacity(by_user.len());
    let mut pred = Vec::with_capacity(by_user.len());
    for (user, rows) in by_user {
        let locs: Vec<(CategoryId, f64)> = rows
            .iter()
            .map(|&i| (samples[i].category, weighting.weight(&samples[i])))
            .collect();
        truth.push(true_profile(user, &locs, n_classes)?);
        let preds: Vec<Prediction<'_>> = rows
            .iter()
            .map(|&i| Prediction {
                weight: weighting.weight(&samples[i]),
                label: predicted[i],
                proba: proba.map(|p| p.row(i)),
            })
            .collect();
        pred.push(predicted_profile(user, &preds, n_classes, mode)?);
    }
    Ok((truth, pred))
}

/// `f(x) = a + c * exp(-lambda * x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecayFit {
    pub a: f64,
    pub c: f64,
    pub lambda: f64,
    pub rss: f64,
}

impl DecayFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.a + self.c * math::exp(-self.lambda * x)
    }

    /// Distance over which the decaying part halves.
    pub fn half_distance(&self) -> Option<f64> {
        (self.lambda > 0.0).then(|| core::f64::consts::LN_2 / self.lambda)
    }
}

pub const DECAY_LAMBDA_MAX: f64 = 0.1;
const DECAY_TOL: f64 = 1e-7;

fn linear_at(xs: &[f64], ys: &[f64], lambda: f64) -> DecayFit {
    let n = xs.len() as f64;
    let (mut se, mut see, mut sy, mut sey) = (0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let e = math::exp(-lambda * x);
        se += e;
        see += e * e;
        sy += y;
        sey += e * y;
    }
    let det = n * see - se * se;
    let (a, c) = if det <= 1e-12 * n * see {
        (sy / n, 0.0)
    } else {
        let c = (n * sey - se * sy) / det;
        ((sy - c * se) / n, c)
    };
    let rss = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - a - c * math::exp(-lambda * x);
            r * r
        })
        .sum();
    DecayFit { a, c, lambda, rss }
}

/// Least-squares exponential decay: golden-section search over lambda with
/// (a, c) solved in closed form at each step.
pub fn fit_decay(xs: &[f64], ys: &[f64]) -> Result<DecayFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::invalid("decay fit needs at least 3 points"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("decay fit inputs must be finite"));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("decay fit needs distinct x values"));
    }
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    if ys.iter().all(|&y| y == ys[0]) {
        return Ok(DecayFit {
            a: ys[0],
            c: 0.0,
            lambda: 0.0,
            rss: 0.0,
        });
    }

    let phi = (math::sqrt(5.0) - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, DECAY_LAMBDA_MAX);
    let mut l1 = hi - phi * (hi - lo);
    let mut l2 = lo + phi * (hi - lo);
    let mut f1 = linear_at(xs, ys, l1);
    let mut f2 = linear_at(xs, ys, l2);
    while hi - lo > DECAY_TOL {
        if f1.rss <= f2.rss {
            hi = l2;
            l2 = l1;
            f2 = f1;
            l1 = hi - phi * (hi - lo);
            f1 = linear_at(xs, ys, l1);
        } else {
            lo = l1;
            l1 = l2;
            f1 = f2;
            l2 = lo + phi * (hi - lo);
            f2 = linear_at(xs, ys, l2);
        }
    }
    let constant = DecayFit {
        a: mean,
        c: 0.0,
        lambda: 0.0,
        rss: ys.iter().map(|y| (y - mean) * (y - mean)).sum(),
    };
    let best = [f1, f2, linear_at(xs, ys, DECAY_LAMBDA_MAX), constant]
        .into_iter()
        .fold(f1, |b, f| if f.rss < b.rss { f } else { b });
    Ok(best)
}

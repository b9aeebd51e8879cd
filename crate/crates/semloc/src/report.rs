//! JSON and CSV outputs of experiment runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::Result;
use semloc_core::eval::{DensityTable, FoldAccuracy};
use semloc_core::obfuscate::ObfuscationPolicy;
use semloc_core::profiling::{DecayFit, UserProfile};
use serde::{Deserialize, Serialize};

use crate::pipeline::{PreparedCity, ScenarioOutcome};

/// Fixed precision keeps outputs byte-stable.
pub fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

#[derive(Debug, Serialize)]
struct ReportJson<'a> {
    city: &'a str,
    point: &'a str,
    policy: ObfuscationPolicy,
    scenario: &'a str,
    n_samples: usize,
    n_users: usize,
    n_pois: usize,
    accuracy: f64,
    mean_radius_used: f64,
    sensitivity: BTreeMap<&'a str, Option<f64>>,
    confusion_labels: &'a [String],
    confusion_counts: Vec<Vec<u64>>,
    folds: &'a [FoldAccuracy],
    density: &'a DensityTable,
    mean_profiling_error: f64,
    hit_at_1: f64,
    hit_at_5: f64,
    median_privacy_loss: f64,
}

/// Writes the per-point bundle into `dir`.
pub fn write_bundle(
    dir: &Path,
    p: &PreparedCity,
    point: &str,
    policy: ObfuscationPolicy,
    o: &ScenarioOutcome,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let labels = &p.category_labels;
    let r = &o.report;
    let k = r.n_classes;
    let json = ReportJson {
        city: &p.city.name,
        point,
        policy,
        scenario: o.scenario.name(),
        n_samples: p.city.samples.len(),
        n_users: p.city.n_users(),
        n_pois: p.city.pois.len(),
        accuracy: r.accuracy,
        mean_radius_used: o.mean_radius_used,
        sensitivity: labels
            .iter()
            .map(|l| l.as_str())
            .zip(r.sensitivity.iter().copied())
            .collect(),
        confusion_labels: labels,
        confusion_counts: (0..k)
            .map(|t| (0..k).map(|c| r.confusion.get(t, c)).collect())
            .collect(),
        folds: &r.folds,
        density: &o.density,
        mean_profiling_error: o.privacy.mean_profiling_error,
        hit_at_1: o.privacy.hit_at_1,
        hit_at_5: o.privacy.hit_at_5,
        median_privacy_loss: o.privacy.median,
    };
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&json)?)?;

    let mut w = csv::Writer::from_path(dir.join("confusion.csv"))?;
    let norm = r.confusion.normalized();
    w.write_record(["true", "predicted", "count", "row_fraction"])?;
    for t in 0..k {
        for c in 0..k {
            w.write_record([
                labels[t].clone(),
                labels[c].clone(),
                r.confusion.get(t, c).to_string(),
                fmt(norm[t * k + c]),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("sensitivity.csv"))?;
    w.write_record(["category", "support", "sensitivity"])?;
    for (c, s) in r.sensitivity.iter().enumerate() {
        w.write_record([labels[c].clone(), r.confusion.support(c).to_string(), opt(*s)])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("density.csv"))?;
    w.write_record(["density_lo", "density_hi", "n", "accuracy"])?;
    for b in &o.density.bins {
        w.write_record([
            b.lo.to_string(),
            b.hi.map(|h| h.to_string()).unwrap_or_default(),
            b.n.to_string(),
            fmt(b.accuracy),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("predictions.csv"))?;
    let mut header = vec![
        "user_id".to_string(),
        "location_id".into(),
        "fold".into(),
        "true".into(),
        "predicted".into(),
    ];
    header.extend(
        labels
            .iter()
            .map(|l| format!("p_{}", semloc_core::taxonomy::slugify(l))),
    );
    w.write_record(&header)?;
    for (i, s) in p.city.samples.iter().enumerate() {
        let mut rec = vec![
            s.user_id.clone(),
            s.location_id.clone(),
            r.fold_of[i].to_string(),
            labels[r.truth[i].index()].clone(),
            labels[r.predicted[i].index()].clone(),
        ];
        rec.extend(r.proba.row(i).iter().map(|v| fmt(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;

    write_profiles(
        &dir.join("profiles.csv"),
        labels,
        &o.true_profiles,
        &o.predicted_profiles,
    )?;

    let mut w = csv::Writer::from_path(dir.join("privacy_loss.csv"))?;
    w.write_record(["user_id", "privacy_loss"])?;
    for (u, pl) in &o.privacy.per_user {
        w.write_record([u.clone(), fmt(*pl)])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per user and profile kind, with one column per category.
pub fn write_profiles(path: &Path, labels: &[String], truth: &[UserProfile], predicted: &[UserProfile]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["user_id".to_string(), "kind".into(), "weight".into()];
    header.extend(labels.iter().cloned());
    w.write_record(&header)?;
    for (kind, list) in [("true", truth), ("predicted", predicted)] {
        for p in list {
            let mut rec = vec![p.user_id.clone(), kind.to_string(), fmt(p.total_weight)];
            rec.extend(p.p.iter().map(|v| fmt(*v)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub city: String,
    pub point: String,
    /// Empty for context-aware points.
    pub radius_m: Option<f64>,
    pub scenario: String,
    pub accuracy: f64,
    pub profiling_error: f64,
    pub hit_at_1: f64,
    pub hit_at_5: f64,
    pub median_pl: f64,
    pub mean_radius_used: f64,
}

pub const COMBINED: &str = "combined";

/// Unweighted mean over cities for every (point, scenario) seen in all of them.
pub fn macro_average(rows: &[SummaryRow]) -> Vec<SummaryRow> {
    let cities: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.city.as_str()).collect();
    if cities.len() < 2 {
        return Vec::new();
    }
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.point.clone(), r.scenario.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .filter_map(|key| {
            let g = &groups[&key];
            if g.len() != cities.len() {
                return None;
            }
            let n = g.len() as f64;
            let mean = |f: fn(&SummaryRow) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / n;
            Some(SummaryRow {
                city: COMBINED.into(),
                point: key.0,
                radius_m: g[0].radius_m,
                scenario: key.1,
                accuracy: mean(|r| r.accuracy),
                profiling_error: mean(|r| r.profiling_error),
                hit_at_1: mean(|r| r.hit_at_1),
                hit_at_5: mean(|r| r.hit_at_5),
                median_pl: mean(|r| r.median_pl),
                mean_radius_used: mean(|r| r.mean_radius_used),
            })
        })
        .collect()
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "city",
        "point",
        "radius_m",
        "scenario",
        "accuracy",
        "profiling_error",
        "hit_at_1",
        "hit_at_5",
        "median_pl",
        "mean_radius_used",
    ])?;
    for r in rows {
        w.write_record([
            r.city.clone(),
            r.point.clone(),
            r.radius_m.map(|v| v.to_string()).unwrap_or_default(),
            r.scenario.clone(),
            fmt(r.accuracy),
            fmt(r.profiling_error),
            fmt(r.hit_at_1),
            fmt(r.hit_at_5),
            fmt(r.median_pl),
            fmt(r.mean_radius_used),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<SummaryRow>, _>>()?)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DecayFitJson {
    pub a: f64,
    pub c: f64,
    pub lambda: f64,
    pub rss: f64,
    pub half_distance_m: Option<f64>,
    pub n_points: usize,
}

impl DecayFitJson {
    pub fn new(f: &DecayFit, n_points: usize) -> Self {
        DecayFitJson {
            a: f.a,
            c: f.c,
            lambda: f.lambda,
            rss: f.rss,
            half_distance_m: f.half_distance(),
            n_points,
        }
    }
}

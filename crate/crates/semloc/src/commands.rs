//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use semloc_core::dataset::{group_to_samples, map_categories, merge_repeat_checkins, pois_from_checkins};
use semloc_core::eval::Scenario;
use semloc_core::geo::{centroid, Projection};
use semloc_core::profiling::fit_decay;
use semloc_core::synth::{generate, SynthSpec};
use semloc_core::taxonomy::Taxonomy;
use semloc_core::variogram::{
    accumulate_chunk, chunk_sizes, doubling_edges, finish, prepare, Subregion, VariogramAccumulator, VariogramResult,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, SweepLabel};
use crate::io;
use crate::pipeline::{prepare_city, prepare_point, run_scenario, train_full_model, PreparedCity, Settings};
use crate::report::{self, fmt, DecayFitJson, SummaryRow};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestReport {
    pub city: String,
    pub lines: usize,
    pub malformed: usize,
    pub checkins: usize,
    pub dropped_labels: usize,
    pub merged_removed: usize,
    pub merged_removed_fraction: f64,
    pub samples: usize,
    pub users: usize,
    pub pois: usize,
    pub pois_dropped: usize,
}

fn load_taxonomy(cfg: &ExperimentConfig) -> Result<Taxonomy> {
    io::load_taxonomy(cfg.taxonomy.categories.as_deref())
}

/// Parses, cleans and groups every city with a check-in file.
pub fn cmd_ingest(cfg: &ExperimentConfig) -> Result<Vec<IngestReport>> {
    cfg.validate(true)?;
    let taxonomy = load_taxonomy(cfg)?;
    let fsq_map = io::load_label_map(cfg.taxonomy.foursquare_map.as_deref(), io::FOURSQUARE_MAP, &taxonomy)?;
    let mut reports = Vec::new();
    for city in &cfg.cities {
        let Some(path) = &city.checkins else { continue };
        let parsed = io::parse_checkins(path)?;
        if parsed.checkins.is_empty() {
            bail!("city {}: no check-ins parsed from {}", city.name, path.display());
        }
        let parsed_count = parsed.checkins.len();
        let (labeled, dropped_labels) =
            map_categories(parsed.checkins, &fsq_map).with_context(|| format!("city {}", city.name))?;
        let after_drop = labeled.len();
        let (kept, merged_removed) = merge_repeat_checkins(labeled);
        let samples = group_to_samples(&kept)?;
        let (pois, pois_dropped) = match &city.osm_pois {
            Some(p) => {
                let map = io::load_label_map(cfg.taxonomy.osm_map.as_deref(), io::OSM_MAP, &taxonomy)?;
                io::parse_osm_pois(p, &map)?
            }
            None => (pois_from_checkins(&kept), 0),
        };
        let dir = cfg.data_dir(city);
        fs::create_dir_all(&dir)?;
        io::write_samples(&dir.join("samples.csv"), &samples, &taxonomy)?;
        io::write_pois(&dir.join("pois.csv"), &pois, &taxonomy)?;
        let users = samples
            .iter()
            .map(|s| s.user_id.as_str())
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        let rep = IngestReport {
            city: city.name.clone(),
            lines: parsed.lines,
            malformed: parsed.malformed.len(),
            checkins: parsed_count,
            dropped_labels,
            merged_removed,
            merged_removed_fraction: merged_removed as f64 / after_drop.max(1) as f64,
            samples: samples.len(),
            users,
            pois: pois.len(),
            pois_dropped,
        };
        fs::write(dir.join("ingest.json"), serde_json::to_string_pretty(&rep)?)?;
        reports.push(rep);
    }
    if reports.is_empty() {
        bail!("no check-ins parsed: no city lists a check-in file");
    }
    Ok(reports)
}

pub fn load_prepared(
    cfg: &ExperimentConfig,
    taxonomy: &Taxonomy,
    settings: &Settings,
) -> Result<Vec<Result<PreparedCity>>> {
    Ok(cfg
        .cities
        .iter()
        .map(|c| {
            let dir = cfg.data_dir(c);
            let samples = io::read_samples(&dir.join("samples.csv"), taxonomy)?;
            let pois = io::read_pois(&dir.join("pois.csv"), taxonomy)?;
            prepare_city(&c.name, samples, pois, taxonomy, c.anchor, settings)
        })
        .collect())
}

#[derive(Debug, Default)]
pub struct RunSummary {
    pub rows: Vec<SummaryRow>,
    /// (city, point, scenario or "*", error message).
    pub failures: Vec<(String, String, String, String)>,
}

fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    Ok(hex::encode(Sha256::digest(toml::to_string(cfg)?.as_bytes())))
}

/// Runs every (city, sweep point, scenario) and writes the bundles, summary and manifest.
/// Failed points are recorded and skipped.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate(false)?;
    let taxonomy = load_taxonomy(cfg)?;
    let settings = Settings::from(cfg);
    fs::create_dir_all(&cfg.output_dir)?;
    let mut out = RunSummary::default();
    let needs_features = cfg.scenarios.iter().any(|s| s.feature_mode().is_some());
    let sweep = cfg.sweep();

    for (city_cfg, prepared) in cfg.cities.iter().zip(load_prepared(cfg, &taxonomy, &settings)?) {
        let p = match prepared {
            Ok(p) => p,
            Err(e) => {
                out.failures
                    .push((city_cfg.name.clone(), "*".into(), "*".into(), format!("{e:#}")));
                continue;
            }
        };
        for sp in &sweep {
            let slug = sp.label.slug();
            let point = match prepare_point(&p, sp.policy, &settings, needs_features) {
                Ok(pt) => pt,
                Err(e) => {
                    out.failures
                        .push((p.city.name.clone(), slug.clone(), "*".into(), format!("{e:#}")));
                    continue;
                }
            };
            let point_dir = cfg.output_dir.join(&p.city.name).join(&slug);
            if cfg.export_features {
                if let Some(m) = &point.features {
                    fs::create_dir_all(&point_dir)?;
                    io::write_feature_matrix(&point_dir.join("features.csv"), m)?;
                }
            }
            for &scenario in &cfg.scenarios {
                let result = run_scenario(&p, &point, scenario, &settings).and_then(|o| {
                    let dir = point_dir.join(scenario.name());
                    report::write_bundle(&dir, &p, &slug, sp.policy, &o)?;
                    if cfg.save_models {
                        if let Some(model) = train_full_model(&p, &point, scenario, &settings)? {
                            io::save_model(&dir.join("model.json"), &model)?;
                        }
                    }
                    Ok(o)
                });
                match result {
                    Ok(o) => out.rows.push(SummaryRow {
                        city: p.city.name.clone(),
                        point: slug.clone(),
                        radius_m: match sp.label {
                            SweepLabel::Radius(r) => Some(r),
                            SweepLabel::Neighbors(_) => None,
                        },
                        scenario: scenario.name().into(),
                        accuracy: o.report.accuracy,
                        profiling_error: o.privacy.mean_profiling_error,
                        hit_at_1: o.privacy.hit_at_1,
                        hit_at_5: o.privacy.hit_at_5,
                        median_pl: o.privacy.median,
                        mean_radius_used: o.mean_radius_used,
                    }),
                    Err(e) => out.failures.push((
                        p.city.name.clone(),
                        slug.clone(),
                        scenario.name().into(),
                        format!("{e:#}"),
                    )),
                }
            }
        }
    }
    let combined = report::macro_average(&out.rows);
    out.rows.extend(combined);
    report::write_summary(&cfg.output_dir.join("summary.csv"), &out.rows)?;
    write_manifest(cfg)?;
    let fail_path = cfg.output_dir.join("failures.csv");
    if out.failures.is_empty() {
        if fail_path.exists() {
            fs::remove_file(&fail_path)?;
        }
    } else {
        let mut w = csv::Writer::from_path(&fail_path)?;
        w.write_record(["city", "point", "scenario", "error"])?;
        for f in &out.failures {
            w.write_record([&f.0, &f.1, &f.2, &f.3])?;
        }
        w.flush()?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    config_sha256: String,
    config: &'a ExperimentConfig,
}

fn write_manifest(cfg: &ExperimentConfig) -> Result<()> {
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config_sha256: config_hash(cfg)?,
        config: cfg,
    };
    fs::write(cfg.output_dir.join("manifest.json"), serde_json::to_string_pretty(&m)?)?;
    Ok(())
}

/// Semivariogram of one city's POIs, sampled in parallel chunks.
pub fn cmd_variogram(cfg: &ExperimentConfig, out_path: Option<&Path>) -> Result<(PathBuf, VariogramResult)> {
    cfg.validate(false)?;
    let taxonomy = load_taxonomy(cfg)?;
    let v = &cfg.variogram;
    let city = match &v.city {
        Some(name) => cfg
            .cities
            .iter()
            .find(|c| &c.name == name)
            .with_context(|| format!("variogram city {name} is not configured"))?,
        None => &cfg.cities[0],
    };
    let pois = io::read_pois(&cfg.data_dir(city).join("pois.csv"), &taxonomy)?;
    let anchor = match city.anchor {
        Some(a) => a,
        None => centroid(pois.iter().map(|p| &p.geo)).context("city has no POIs")?,
    };
    let proj = Projection::new(anchor)?;
    let points = pois
        .iter()
        .map(|p| proj.project(&p.geo))
        .collect::<semloc_core::Result<Vec<_>>>()?;
    let cats: Vec<_> = pois.iter().map(|p| p.category).collect();
    let subregion = match v.side_km {
        Some(side) => Some(Subregion {
            center: match v.center {
                Some(c) => proj.project(&c)?,
                None => semloc_core::geo::LocalPoint::new(0.0, 0.0),
            },
            side_m: side * 1000.0,
        }),
        None => None,
    };
    let edges = v.edges.clone().unwrap_or_else(doubling_edges);
    let (pts, cs) = prepare(&points, &cats, subregion, &edges)?;
    let chunks = chunk_sizes(v.n_pairs);
    let acc = chunks
        .par_iter()
        .enumerate()
        .map(|(i, &n)| accumulate_chunk(&pts, &cs, &edges, cfg.seed, i as u64, n))
        .reduce(
            || VariogramAccumulator::new(edges.len() - 1),
            |mut a, b| {
                a.merge(&b);
                a
            },
        );
    let result = finish(&acc, &edges, subregion, pts.len(), v.n_pairs, cfg.seed);
    let path = out_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join(format!("variogram_{}.csv", city.name)));
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["bin_lo", "bin_hi", "gamma", "n_pairs"])?;
    for b in &result.bins {
        w.write_record([
            b.lo.to_string(),
            b.hi.to_string(),
            b.gamma.map(fmt).unwrap_or_default(),
            b.n_pairs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok((path, result))
}

/// Which series of a summary to fit.
#[derive(Debug, Clone)]
pub struct FitSelection {
    pub scenario: Scenario,
    /// Defaults to the combined rows when present, else the only city.
    pub city: Option<String>,
    pub metric: String,
}

/// Reads (x, y) pairs from a CSV with `x,y` columns or from a run summary.
pub fn read_fit_points(path: &Path, sel: &FitSelection) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    if headers.iter().any(|h| h == "x") && headers.iter().any(|h| h == "y") {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for rec in rdr.deserialize::<(f64, f64)>() {
            let (x, y) = rec?;
            xs.push(x);
            ys.push(y);
        }
        return Ok((xs, ys));
    }
    let rows = report::read_summary(path)?;
    let city = match &sel.city {
        Some(c) => c.clone(),
        None if rows.iter().any(|r| r.city == report::COMBINED) => report::COMBINED.into(),
        None => {
            let cities: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.city.as_str()).collect();
            if cities.len() != 1 {
                bail!("summary holds several cities; choose one with --city");
            }
            cities.into_iter().next().unwrap_or_default().to_string()
        }
    };
    let metric: fn(&SummaryRow) -> f64 = match sel.metric.as_str() {
        "accuracy" => |r| r.accuracy,
        "profiling_error" => |r| r.profiling_error,
        "hit_at_1" => |r| r.hit_at_1,
        "hit_at_5" => |r| r.hit_at_5,
        "median_pl" => |r| r.median_pl,
        m => bail!("unknown metric {m:?}"),
    };
    let (xs, ys) = rows
        .iter()
        .filter(|r| r.city == city && r.scenario == sel.scenario.name())
        .filter_map(|r| r.radius_m.map(|x| (x, metric(r))))
        .unzip();
    Ok((xs, ys))
}

pub fn cmd_fit(input: &Path, sel: &FitSelection, output: Option<&Path>) -> Result<DecayFitJson> {
    let (xs, ys) = read_fit_points(input, sel)?;
    let fit = fit_decay(&xs, &ys).with_context(|| format!("fitting {} points", xs.len()))?;
    let json = DecayFitJson::new(&fit, xs.len());
    if let Some(p) = output {
        fs::write(p, serde_json::to_string_pretty(&json)?)?;
    }
    Ok(json)
}

/// Markdown table of the summary, optionally restricted to one sweep point.
pub fn cmd_report(summary: &Path, point: Option<&str>) -> Result<String> {
    let rows = report::read_summary(summary)?;
    let mut s = String::from("| city | point | scenario | accuracy | profiling error | hit@1 | hit@5 | median PL |\n|---|---|---|---|---|---|---|---|\n");
    for r in rows.iter().filter(|r| point.is_none_or(|p| r.point == p)) {
        s.push_str(&format!(
            "| {} | {} | {} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} |\n",
            r.city, r.point, r.scenario, r.accuracy, r.profiling_error, r.hit_at_1, r.hit_at_5, r.median_pl
        ));
    }
    Ok(s)
}

/// Writes a synthetic city in the canonical format, plus its taxonomy.
pub fn cmd_synth(spec: &SynthSpec, dir: &Path) -> Result<(usize, usize)> {
    let city = generate(spec)?;
    let (kept, _) = merge_repeat_checkins(city.checkins);
    let samples = group_to_samples(&kept)?;
    fs::create_dir_all(dir)?;
    io::write_samples(&dir.join("samples.csv"), &samples, &city.taxonomy)?;
    io::write_pois(&dir.join("pois.csv"), &city.pois, &city.taxonomy)?;
    let mut t = city.taxonomy.labels().join("\n");
    t.push('\n');
    fs::write(dir.join("categories.txt"), t)?;
    Ok((samples.len(), city.pois.len()))
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use semloc::commands::{self, FitSelection};
use semloc::config::ExperimentConfig;
use semloc_core::eval::Scenario;
use semloc_core::synth::SynthSpec;
use semloc_core::taxonomy::FOURSQUARE_CATEGORIES;

/// Caps the worker pool size.
const WORKERS_ENV: &str = "SEMLOC_WORKERS";

#[derive(Parser)]
#[command(name = "semloc", version, about = "Semantic location-privacy attack simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse check-ins and POIs into canonical samples.csv / pois.csv.
    Ingest {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Run the obfuscation sweep over all configured scenarios.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Comma-separated radii in meters.
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        scenarios: Option<Vec<String>>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Category semivariogram of a city's POIs.
    Variogram {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        pairs: Option<u64>,
    },
    /// Fit f(x) = a + c * exp(-lambda * x) to a summary or an x,y CSV.
    Fit {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, default_value = "gbdt_spatiotemporal")]
        scenario: String,
        #[arg(long)]
        city: Option<String>,
        #[arg(long, default_value = "accuracy")]
        metric: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a summary as a table.
    Report {
        #[arg(short, long)]
        summary: PathBuf,
        /// Restrict to one sweep point, e.g. r100.
        #[arg(long)]
        point: Option<String>,
    },
    /// Generate a synthetic city in the canonical format.
    Synth {
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 300)]
        users: usize,
        #[arg(long, default_value_t = 3000)]
        pois: usize,
        /// Number of categories; the Foursquare labels are used when omitted.
        #[arg(long)]
        categories: Option<usize>,
        #[arg(long, default_value_t = 5.0)]
        region_km: f64,
        #[arg(long)]
        cluster_radius: Option<f64>,
        #[arg(long, default_value_t = 4)]
        clusters: usize,
        #[arg(long)]
        no_temporal: bool,
    },
}

fn init_pool() -> Result<()> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .with_context(|| format!("{WORKERS_ENV}={v:?} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    init_pool()?;
    match cli.command {
        Command::Ingest { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            for r in commands::cmd_ingest(&cfg)? {
                println!(
                    "{}: {} check-ins ({} malformed lines), {} dropped labels, {} merged ({:.3}%), {} samples, {} users, {} POIs",
                    r.city,
                    r.checkins,
                    r.malformed,
                    r.dropped_labels,
                    r.merged_removed,
                    100.0 * r.merged_removed_fraction,
                    r.samples,
                    r.users,
                    r.pois
                );
            }
            Ok(true)
        }
        Command::Run {
            config,
            seed,
            output,
            radii,
            scenarios,
            folds,
            rounds,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = output {
                cfg.output_dir = o;
            }
            if let Some(r) = radii {
                cfg.radii = r;
            }
            if let Some(list) = scenarios {
                cfg.scenarios = list
                    .iter()
                    .map(|s| s.parse())
                    .collect::<semloc_core::Result<Vec<Scenario>>>()?;
            }
            if let Some(f) = folds {
                cfg.folds = f;
            }
            if let Some(r) = rounds {
                cfg.model.n_rounds = r;
            }
            let summary = commands::cmd_run(&cfg)?;
            for r in &summary.rows {
                println!(
                    "{:10} {:8} {:22} acc {:.3}  err {:.3}  hit@5 {:.3}  PL {:.3}",
                    r.city, r.point, r.scenario, r.accuracy, r.profiling_error, r.hit_at_5, r.median_pl
                );
            }
            for (city, point, scenario, err) in &summary.failures {
                eprintln!("FAILED {city} {point} {scenario}: {err}");
            }
            Ok(summary.failures.is_empty())
        }
        Command::Variogram { config, out, pairs } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(p) = pairs {
                cfg.variogram.n_pairs = p;
            }
            let (path, _) = commands::cmd_variogram(&cfg, out.as_deref())?;
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::Fit {
            input,
            scenario,
            city,
            metric,
            out,
        } => {
            let sel = FitSelection {
                scenario: scenario.parse()?,
                city,
                metric,
            };
            let fit = commands::cmd_fit(&input, &sel, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
            Ok(true)
        }
        Command::Report { summary, point } => {
            print!("{}", commands::cmd_report(&summary, point.as_deref())?);
            Ok(true)
        }
        Command::Synth {
            out,
            seed,
            users,
            pois,
            categories,
            region_km,
            cluster_radius,
            clusters,
            no_temporal,
        } => {
            let labels: Vec<String> = match categories {
                Some(n) => (0..n).map(|i| format!("Category {i}")).collect(),
                None => FOURSQUARE_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            };
            let mut spec = SynthSpec::uniform(&labels, seed);
            spec.n_users = users;
            spec.n_pois = pois;
            spec.region_km = region_km;
            spec.temporal_signal = !no_temporal;
            if let Some(r) = cluster_radius {
                spec = spec.with_clustering(r, clusters);
            }
            let (samples, n_pois) = commands::cmd_synth(&spec, &out)?;
            println!("wrote {samples} samples and {n_pois} POIs to {}", out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

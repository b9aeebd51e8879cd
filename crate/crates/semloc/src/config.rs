//! Declarative experiment configuration (TOML).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use semloc_core::eval::{Scenario, SplitMode};
use semloc_core::features::SpatialParams;
use semloc_core::geo::GeoPoint;
use semloc_core::model::GbdtParams;
use semloc_core::obfuscate::ObfuscationPolicy;
use semloc_core::profiling::{ProfileMode, Weighting};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CityConfig {
    pub name: String,
    /// Raw check-in TSV, read by `ingest`.
    #[serde(default)]
    pub checkins: Option<PathBuf>,
    /// Optional external POI CSV replacing the check-in venues as context.
    #[serde(default)]
    pub osm_pois: Option<PathBuf>,
    /// Canonical `samples.csv` / `pois.csv`; defaults to `<output_dir>/data/<name>`.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    #[serde(default)]
    pub anchor: Option<GeoPoint>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomyConfig {
    /// One category label per line; the 12 Foursquare categories when absent.
    pub categories: Option<PathBuf>,
    pub foursquare_map: Option<PathBuf>,
    pub osm_map: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariogramConfig {
    /// City whose POIs are used; the first city when absent.
    pub city: Option<String>,
    pub center: Option<GeoPoint>,
    pub side_km: Option<f64>,
    pub n_pairs: u64,
    pub edges: Option<Vec<f64>>,
}

impl Default for VariogramConfig {
    fn default() -> Self {
        VariogramConfig {
            city: None,
            center: None,
            side_km: Some(20.0),
            n_pairs: 2_000_000,
            edges: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpatialConfig {
    pub k: usize,
    pub radius_m: f64,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        let p = SpatialParams::default();
        SpatialConfig {
            k: p.k,
            radius_m: p.radius_m,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub cities: Vec<CityConfig>,
    pub taxonomy: TaxonomyConfig,
    pub scenarios: Vec<Scenario>,
    /// Fixed masking radii in meters; 0 means no masking.
    pub radii: Vec<f64>,
    /// Context-aware masking: m-th nearest POI.
    pub context_aware_m: Vec<usize>,
    pub poi_fraction: f64,
    pub split: SplitMode,
    pub folds: usize,
    pub spatial: SpatialConfig,
    pub model: GbdtParams,
    pub profile_mode: ProfileMode,
    pub weighting: Weighting,
    pub density_radius_m: f64,
    pub density_edges: Vec<usize>,
    pub variogram: VariogramConfig,
    /// Also write the feature matrix of every sweep point.
    pub export_features: bool,
    /// Also train each gbdt scenario on all samples and save the model.
    pub save_models: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            output_dir: PathBuf::from("out"),
            cities: Vec::new(),
            taxonomy: TaxonomyConfig::default(),
            scenarios: Scenario::ALL.to_vec(),
            radii: vec![0.0, 25.0, 50.0, 100.0, 200.0, 400.0, 800.0, 1200.0],
            context_aware_m: Vec::new(),
            poi_fraction: 1.0,
            split: SplitMode::UserCv,
            folds: 10,
            spatial: SpatialConfig::default(),
            model: GbdtParams::default(),
            profile_mode: ProfileMode::Soft,
            weighting: Weighting::Visits,
            density_radius_m: 200.0,
            density_edges: vec![0, 10, 25, 50, 100, 200],
            variogram: VariogramConfig::default(),
            export_features: false,
            save_models: false,
        }
    }
}

/// A masking setting within a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub label: SweepLabel,
    pub policy: ObfuscationPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepLabel {
    Radius(f64),
    Neighbors(usize),
}

impl SweepLabel {
    /// Directory-safe name, e.g. `r100` or `m16`.
    pub fn slug(&self) -> String {
        match self {
            SweepLabel::Radius(r) => format!("r{r}"),
            SweepLabel::Neighbors(m) => format!("m{m}"),
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file; relative paths are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for c in &mut self.cities {
            for p in [&mut c.checkins, &mut c.osm_pois, &mut c.data_dir]
                .into_iter()
                .flatten()
            {
                fix(p);
            }
        }
        let t = &mut self.taxonomy;
        for p in [&mut t.categories, &mut t.foursquare_map, &mut t.osm_map]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    pub fn data_dir(&self, city: &CityConfig) -> PathBuf {
        city.data_dir
            .clone()
            .unwrap_or_else(|| self.output_dir.join("data").join(&city.name))
    }

    pub fn spatial_params(&self) -> SpatialParams {
        SpatialParams {
            k: self.spatial.k,
            radius_m: self.spatial.radius_m,
        }
    }

    pub fn sweep(&self) -> Vec<SweepPoint> {
        let mut out: Vec<SweepPoint> = self
            .radii
            .iter()
            .map(|&r| SweepPoint {
                label: SweepLabel::Radius(r),
                policy: if r == 0.0 {
                    ObfuscationPolicy::none()
                } else {
                    ObfuscationPolicy::fixed(r, self.seed)
                },
            })
            .collect();
        out.extend(self.context_aware_m.iter().map(|&m| SweepPoint {
            label: SweepLabel::Neighbors(m),
            policy: ObfuscationPolicy::context_aware(m, self.seed),
        }));
        out
    }

    /// Checks value ranges, and that referenced input files exist when `inputs` is set.
    pub fn validate(&self, inputs: bool) -> Result<()> {
        if self.cities.is_empty() {
            bail!("config lists no cities");
        }
        let mut names: Vec<&str> = self.cities.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) || names.iter().any(|n| n.is_empty() || n.contains(['/', '\\'])) {
            bail!("city names must be unique, non-empty and contain no path separators");
        }
        if self.radii.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            bail!("radii must be finite and >= 0");
        }
        if self.context_aware_m.contains(&0) {
            bail!("context-aware m must be >= 1");
        }
        if !(self.poi_fraction > 0.0 && self.poi_fraction <= 1.0) {
            bail!("poi_fraction must lie in (0, 1]");
        }
        if self.folds < 2 {
            bail!("need at least 2 folds");
        }
        if self.spatial.k == 0 || !(self.spatial.radius_m > 0.0) || !(self.density_radius_m > 0.0) {
            bail!("k and the feature/density radii must be positive");
        }
        if self.scenarios.is_empty() {
            bail!("no scenarios selected");
        }
        self.model.validate()?;
        if inputs {
            for c in &self.cities {
                for p in [&c.checkins, &c.osm_pois].into_iter().flatten() {
                    if !p.exists() {
                        bail!("city {}: {} does not exist", c.name, p.display());
                    }
                }
            }
            let t = &self.taxonomy;
            for p in [&t.categories, &t.foursquare_map, &t.osm_map].into_iter().flatten() {
                if !p.exists() {
                    bail!("{} does not exist", p.display());
                }
            }
        }
        Ok(())
    }
}

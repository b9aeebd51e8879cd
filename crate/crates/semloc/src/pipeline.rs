//! One sweep point of an experiment: mask, featurize, cross-validate, profile.

use anyhow::{Context, Result};
use rayon::prelude::*;
use semloc_core::city::CityData;
use semloc_core::dataset::{subsample_pois, Poi, UserLocationSample};
use semloc_core::eval::{
    density_stratified_accuracy, make_spatial_folds, make_user_folds, poi_density, run_fold, DensityTable,
    EvaluationReport, Scenario, ScenarioInput, SplitMode, SplitPlan,
};
use semloc_core::features::{
    featurize_sample, FeatureMatrix, FeatureMode, FeatureSchema, SpatialParams, TEMPORAL_COLUMNS,
};
use semloc_core::geo::{GeoPoint, LocalPoint};
use semloc_core::model::{GbdtModel, GbdtParams};
use semloc_core::obfuscate::{obfuscate_all, ObfuscationPolicy};
use semloc_core::profiling::{
    build_profiles, evaluate_profiles, PrivacyLossReport, ProfileMode, UserProfile, Weighting,
};
use semloc_core::taxonomy::Taxonomy;

use crate::config::ExperimentConfig;

/// Experiment parameters shared by all sweep points.
#[derive(Debug, Clone)]
pub struct Settings {
    pub split: SplitMode,
    pub folds: usize,
    pub spatial: SpatialParams,
    pub gbdt: GbdtParams,
    pub profile_mode: ProfileMode,
    pub weighting: Weighting,
    pub density_radius_m: f64,
    pub density_edges: Vec<usize>,
    pub poi_fraction: f64,
    pub seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings::from(&ExperimentConfig::default())
    }
}

impl From<&ExperimentConfig> for Settings {
    fn from(c: &ExperimentConfig) -> Self {
        Settings {
            split: c.split,
            folds: c.folds,
            spatial: c.spatial_params(),
            gbdt: c.model,
            profile_mode: c.profile_mode,
            weighting: c.weighting,
            density_radius_m: c.density_radius_m,
            density_edges: c.density_edges.clone(),
            poi_fraction: c.poi_fraction,
            seed: c.seed,
        }
    }
}

/// A city with its split plan and true-location POI densities.
#[derive(Debug, Clone)]
pub struct PreparedCity {
    pub city: CityData,
    pub category_labels: Vec<String>,
    pub plan: SplitPlan,
    pub density: Vec<usize>,
}

pub fn prepare_city(
    name: &str,
    samples: Vec<UserLocationSample>,
    pois: Vec<Poi>,
    taxonomy: &Taxonomy,
    anchor: Option<GeoPoint>,
    settings: &Settings,
) -> Result<PreparedCity> {
    let pois = if settings.poi_fraction < 1.0 {
        subsample_pois(&pois, settings.poi_fraction, settings.seed)?
    } else {
        pois
    };
    let city =
        CityData::new(name, samples, pois, taxonomy.len(), anchor).with_context(|| format!("building city {name}"))?;
    let plan = match settings.split {
        SplitMode::UserCv => {
            let users: Vec<&str> = city.samples.iter().map(|s| s.user_id.as_str()).collect();
            make_user_folds(&users, settings.folds, settings.seed)?
        }
        SplitMode::SpatialGrid => make_spatial_folds(&city.sample_points)?,
    };
    let density = poi_density(&city.sample_points, &city.poi_index, settings.density_radius_m)?;
    Ok(PreparedCity {
        city,
        category_labels: taxonomy.labels().to_vec(),
        plan,
        density,
    })
}

/// Masked positions and the full spatio-temporal matrix for one policy.
#[derive(Debug, Clone)]
pub struct PointData {
    pub policy: ObfuscationPolicy,
    pub masked: Vec<LocalPoint>,
    pub mean_radius_used: f64,
    pub features: Option<FeatureMatrix>,
}

/// Masks every sample once (keyed by its index) and featurizes in parallel.
pub fn prepare_point(
    p: &PreparedCity,
    policy: ObfuscationPolicy,
    settings: &Settings,
    features: bool,
) -> Result<PointData> {
    let city = &p.city;
    let masked = obfuscate_all(
        &city.sample_points,
        0..city.samples.len() as u64,
        &policy,
        &city.poi_index,
    )?;
    let mean_radius_used = masked.iter().map(|m| m.radius_used).sum::<f64>() / masked.len() as f64;
    let masked: Vec<LocalPoint> = masked.into_iter().map(|m| m.point).collect();
    let features = if features {
        let mode = FeatureMode::Spatiotemporal;
        let k = p.category_labels.len();
        let rows = (0..city.samples.len())
            .into_par_iter()
            .map(|i| {
                let mut row = Vec::new();
                featurize_sample(city, i, mode, k, Some(&masked[i]), &settings.spatial, &mut row)?;
                Ok(row)
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let m = FeatureMatrix::from_rows(FeatureSchema::new(mode, &p.category_labels), &rows)?;
        if let Some((row, column)) = m.find_non_finite() {
            return Err(semloc_core::Error::NonFinite { row, column }.into());
        }
        Some(m)
    } else {
        None
    };
    Ok(PointData {
        policy,
        masked,
        mean_radius_used,
        features,
    })
}

fn scenario_columns(p: &PreparedCity, scenario: Scenario) -> Option<Vec<String>> {
    match scenario.feature_mode()? {
        FeatureMode::Temporal => Some(TEMPORAL_COLUMNS.iter().map(|s| s.to_string()).collect()),
        mode => Some(FeatureSchema::new(mode, &p.category_labels).columns),
    }
}

/// Evaluation, density breakdown and profiles for one scenario at one point.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub scenario: Scenario,
    pub report: EvaluationReport,
    pub density: DensityTable,
    pub true_profiles: Vec<UserProfile>,
    pub predicted_profiles: Vec<UserProfile>,
    pub privacy: PrivacyLossReport,
    pub mean_radius_used: f64,
}

pub fn scenario_matrix(p: &PreparedCity, point: &PointData, scenario: Scenario) -> Result<Option<FeatureMatrix>> {
    match scenario_columns(p, scenario) {
        None => Ok(None),
        Some(cols) => {
            let full = point
                .features
                .as_ref()
                .context("gbdt scenario requested without features")?;
            Ok(Some(full.select_columns(&cols)?))
        }
    }
}

pub fn run_scenario(
    p: &PreparedCity,
    point: &PointData,
    scenario: Scenario,
    settings: &Settings,
) -> Result<ScenarioOutcome> {
    let labels = p.city.labels();
    let x = scenario_matrix(p, point, scenario)?;
    let input = ScenarioInput {
        scenario,
        n_classes: p.city.n_classes,
        labels: &labels,
        features: x.as_ref(),
        masked_points: &point.masked,
        poi_index: &p.city.poi_index,
        poi_categories: &p.city.poi_categories,
        gbdt: &settings.gbdt,
        seed: settings.seed,
    };
    let outcomes = (0..p.plan.n_folds)
        .into_par_iter()
        .map(|fold| run_fold(&input, &p.plan, fold))
        .collect::<semloc_core::Result<Vec<_>>>()?;
    let report = EvaluationReport::from_folds(
        scenario,
        &labels,
        p.city.n_classes,
        outcomes.into_iter().flatten().collect(),
    )?;
    let density = density_stratified_accuracy(&report.correct(), &p.density, &settings.density_edges)?;
    let (true_profiles, predicted_profiles) = build_profiles(
        &p.city.samples,
        &report.predicted,
        Some(&report.proba),
        p.city.n_classes,
        settings.profile_mode,
        settings.weighting,
    )?;
    let privacy = evaluate_profiles(&predicted_profiles, &true_profiles)?;
    Ok(ScenarioOutcome {
        scenario,
        report,
        density,
        true_profiles,
        predicted_profiles,
        privacy,
        mean_radius_used: point.mean_radius_used,
    })
}

/// Trains one model on every sample, for export.
pub fn train_full_model(
    p: &PreparedCity,
    point: &PointData,
    scenario: Scenario,
    settings: &Settings,
) -> Result<Option<GbdtModel>> {
    let Some(x) = scenario_matrix(p, point, scenario)? else {
        return Ok(None);
    };
    Ok(Some(GbdtModel::train(
        &x,
        &p.city.labels(),
        p.city.n_classes,
        &settings.gbdt,
    )?))
}

//! Temporal and spatial feature extraction.
//!
//! Column layout (stable, used for CSV headers and model schemas):
//! ten temporal columns, then per-category k-NN counts and the k-NN mean
//! distance, then per-category radius counts and per-category minimum
//! distances within the radius.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::city::{CityData, UserTimeline};
use crate::error::{Error, Result};
use crate::geo::LocalPoint;
use crate::index::SpatialIndex;
use crate::math;
use crate::taxonomy::{slugify, CategoryId};
use crate::time::Timestamp;

pub const TEMPORAL_COLUMNS: [&str; 10] = [
    "log_visit_count",
    "rel_visit_frequency",
    "mean_log_duration_h",
    "frac_weekend",
    "frac_morning",
    "frac_afternoon",
    "frac_evening",
    "frac_night",
    "mean_sin_hour",
    "mean_cos_hour",
];

/// f_dur when no visit of a sample has a successor check-in: ln(24 h).
pub const NO_SUCCESSOR_LOG_DURATION: f64 = 3.178_053_830_347_945_6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalFeatures {
    pub log_visit_count: f64,
    pub rel_visit_frequency: f64,
    pub mean_log_duration_h: f64,
    pub frac_weekend: f64,
    pub frac_morning: f64,
    pub frac_afternoon: f64,
    pub frac_evening: f64,
    pub frac_night: f64,
    pub mean_sin_hour: f64,
    pub mean_cos_hour: f64,
}

impl TemporalFeatures {
    pub fn to_array(&self) -> [f64; 10] {
        [
            self.log_visit_count,
            self.rel_visit_frequency,
            self.mean_log_duration_h,
            self.frac_weekend,
            self.frac_morning,
            self.frac_afternoon,
            self.frac_evening,
            self.frac_night,
            self.mean_sin_hour,
            self.mean_cos_hour,
        ]
    }
}

/// Daytime bin of a local hour: morning [0,12), afternoon [12,17),
/// evening [17,22), night [22,24).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DayPart {
    Morning,
    Afternoon,
    Evening,
    Night,
}

impl DayPart {
    pub fn of_hour(hour: u8) -> DayPart {
        match hour {
            0..=11 => DayPart::Morning,
            12..=16 => DayPart::Afternoon,
            17..=21 => DayPart::Evening,
            _ => DayPart::Night,
        }
    }
}

/// Temporal features of one sample.
///
/// `successors[i]` is the UTC time of the user's next check-in anywhere after
/// `visits[i]`, if any.
pub fn temporal_features(
    visits: &[Timestamp],
    user_total_checkins: usize,
    successors: &[Option<i64>],
) -> Result<TemporalFeatures> {
    if visits.is_empty() {
        return Err(Error::invalid("sample has no visits"));
    }
    if successors.len() != visits.len() {
        return Err(Error::DimensionMismatch {
            left: visits.len(),
            right: successors.len(),
        });
    }
    if user_total_checkins < visits.len() {
        return Err(Error::invalid("user total check-ins smaller than sample visit count"));
    }
    let n = visits.len() as f64;
    let (mut weekend, mut morning, mut afternoon, mut evening, mut night) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut sin_sum, mut cos_sum) = (0.0, 0.0);
    let (mut dur_sum, mut dur_n) = (0.0, 0usize);
    for (v, next) in visits.iter().zip(successors) {
        let local = v.local();
        if local.is_weekend() {
            weekend += 1.0;
        }
        match DayPart::of_hour(local.hour) {
            DayPart::Morning => morning += 1.0,
            DayPart::Afternoon => afternoon += 1.0,
            DayPart::Evening => evening += 1.0,
            DayPart::Night => night += 1.0,
        }
        let angle = TAU * local.hour_of_day() / 24.0;
        sin_sum += math::sin(angle);
        cos_sum += math::cos(angle);
        if let Some(next) = next {
            let hours = (*next - v.utc) as f64 / 3600.0;
            if hours > 0.0 {
                dur_sum += math::ln(hours);
                dur_n += 1;
            }
        }
    }
    Ok(TemporalFeatures {
        log_visit_count: math::ln(n),
        rel_visit_frequency: n / user_total_checkins as f64,
        mean_log_duration_h: if dur_n == 0 {
            NO_SUCCESSOR_LOG_DURATION
        } else {
            dur_sum / dur_n as f64
        },
        frac_weekend: weekend / n,
        frac_morning: morning / n,
        frac_afternoon: afternoon / n,
        frac_evening: evening / n,
        frac_night: night / n,
        mean_sin_hour: sin_sum / n,
        mean_cos_hour: cos_sum / n,
    })
}

/// Temporal features of a sample using the user's full check-in timeline.
pub fn temporal_features_for(visits: &[Timestamp], timeline: &UserTimeline) -> Result<TemporalFeatures> {
    let successors: Vec<Option<i64>> = visits.iter().map(|v| timeline.successor(v.utc)).collect();
    temporal_features(visits, timeline.len(), &successors)
}

/// Neighbourhood parameters for spatial features.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpatialParams {
    pub k: usize,
    pub radius_m: f64,
}

impl Default for SpatialParams {
    fn default() -> Self {
        SpatialParams { k: 20, radius_m: 200.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialFeatures {
    pub knn_counts: Vec<u32>,
    pub knn_mean_distance: f64,
    pub radius_counts: Vec<u32>,
    /// `radius_m` where the category is absent within the radius.
    pub radius_min_distance: Vec<f64>,
}

pub fn spatial_features(
    q: &LocalPoint,
    pois: &SpatialIndex,
    poi_categories: &[CategoryId],
    n_categories: usize,
    params: &SpatialParams,
) -> Result<SpatialFeatures> {
    if pois.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let mut knn_counts = alloc::vec![0u32; n_categories];
    let nn = pois.knn(q, params.k);
    let mut dist_sum = 0.0;
    for n in &nn {
        knn_counts[category_of(poi_categories, n.id, n_categories)?] += 1;
        dist_sum += n.distance;
    }
    let mut radius_counts = alloc::vec![0u32; n_categories];
    let mut radius_min_distance = alloc::vec![params.radius_m; n_categories];
    for n in pois.radius_query(q, params.radius_m)? {
        let c = category_of(poi_categories, n.id, n_categories)?;
        radius_counts[c] += 1;
        if n.distance < radius_min_distance[c] {
            radius_min_distance[c] = n.distance;
        }
    }
    Ok(SpatialFeatures {
        knn_counts,
        knn_mean_distance: if nn.is_empty() { 0.0 } else { dist_sum / nn.len() as f64 },
        radius_counts,
        radius_min_distance,
    })
}

fn category_of(poi_categories: &[CategoryId], id: usize, n: usize) -> Result<usize> {
    let c = poi_categories
        .get(id)
        .ok_or_else(|| Error::invalid(alloc::format!("POI id {id} has no category")))?
        .index();
    if c >= n {
        return Err(Error::UnknownCategory(alloc::format!("{c}")));
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FeatureMode {
    Temporal,
    Spatial,
    Spatiotemporal,
}

impl FeatureMode {
    pub fn uses_temporal(self) -> bool {
        matches!(self, FeatureMode::Temporal | FeatureMode::Spatiotemporal)
    }

    pub fn uses_spatial(self) -> bool {
        matches!(self, FeatureMode::Spatial | FeatureMode::Spatiotemporal)
    }
}

/// Named, ordered feature columns.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureSchema {
    pub columns: Vec<String>,
}

impl FeatureSchema {
    /// `category_labels` are the POI categories, in id order.
    pub fn new<S: AsRef<str>>(mode: FeatureMode, category_labels: &[S]) -> Self {
        let mut columns: Vec<String> = Vec::new();
        if mode.uses_temporal() {
            columns.extend(TEMPORAL_COLUMNS.iter().map(|c| String::from(*c)));
        }
        if mode.uses_spatial() {
            let slugs: Vec<String> = category_labels.iter().map(|l| slugify(l.as_ref())).collect();
            columns.extend(slugs.iter().map(|s| alloc::format!("knn_count_{s}")));
            columns.push(String::from("knn_mean_distance"));
            columns.extend(slugs.iter().map(|s| alloc::format!("radius_count_{s}")));
            columns.extend(slugs.iter().map(|s| alloc::format!("radius_min_dist_{s}")));
        }
        FeatureSchema { columns }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    schema: FeatureSchema,
    n_rows: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(schema: FeatureSchema, data: Vec<f64>) -> Result<Self> {
        let width = schema.len();
        if width == 0 || !data.len().is_multiple_of(width) {
            return Err(Error::SchemaMismatch(alloc::format!(
                "{} values do not fill rows of width {}",
                data.len(),
                width
            )));
        }
        Ok(FeatureMatrix {
            n_rows: data.len() / width,
            schema,
            data,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(schema: FeatureSchema, rows: &[R]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * schema.len());
        for r in rows {
            if r.as_ref().len() != schema.len() {
                return Err(Error::DimensionMismatch {
                    left: r.as_ref().len(),
                    right: schema.len(),
                });
            }
            data.extend_from_slice(r.as_ref());
        }
        FeatureMatrix::new(schema, data)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_cols();
        &self.data[i * w..(i + 1) * w]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols() + col]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_rows).map(move |r| self.get(r, col))
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols());
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            schema: self.schema.clone(),
            n_rows: rows.len(),
            data,
        }
    }

    /// Columns picked by name; errors if any is missing.
    pub fn select_columns(&self, names: &[String]) -> Result<FeatureMatrix> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.schema
                    .columns
                    .iter()
                    .position(|c| c == n)
                    .ok_or_else(|| Error::SchemaMismatch(alloc::format!("missing column {n}")))
            })
            .collect::<Result<_>>()?;
        let mut data = Vec::with_capacity(self.n_rows * idx.len());
        for r in 0..self.n_rows {
            let row = self.row(r);
            data.extend(idx.iter().map(|&c| row[c]));
        }
        FeatureMatrix::new(
            FeatureSchema {
                columns: names.to_vec(),
            },
            data,
        )
    }

    /// First non-finite cell, if any.
    pub fn find_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| (i / self.n_cols(), i % self.n_cols()))
    }
}

/// Appends the features of sample `i` of `city` to `out`, in schema order.
/// `masked` is the sample's masked position; only spatial modes read it.
pub fn featurize_sample(
    city: &CityData,
    i: usize,
    mode: FeatureMode,
    n_categories: usize,
    masked: Option<&LocalPoint>,
    params: &SpatialParams,
    out: &mut Vec<f64>,
) -> Result<()> {
    let s = &city.samples[i];
    if mode.uses_temporal() {
        let t = temporal_features_for(&s.visits, city.timeline(&s.user_id))?;
        out.extend_from_slice(&t.to_array());
    }
    if mode.uses_spatial() {
        let q = masked.ok_or_else(|| Error::invalid("spatial features need a masked position"))?;
        let f = spatial_features(q, &city.poi_index, &city.poi_categories, n_categories, params)?;
        out.extend(f.knn_counts.iter().map(|&c| c as f64));
        out.push(f.knn_mean_distance);
        out.extend(f.radius_counts.iter().map(|&c| c as f64));
        out.extend_from_slice(&f.radius_min_distance);
    }
    Ok(())
}

/// Feature matrix and labels for every sample of a city.
///
/// Spatial columns are computed at `masked_points` (one per sample); temporal
/// columns always use the raw visit times.
pub fn featurize(
    city: &CityData,
    mode: FeatureMode,
    category_labels: &[String],
    masked_points: &[LocalPoint],
    params: &SpatialParams,
) -> Result<(FeatureMatrix, Vec<CategoryId>)> {
    if mode.uses_spatial() && masked_points.len() != city.samples.len() {
        return Err(Error::DimensionMismatch {
            left: masked_points.len(),
            right: city.samples.len(),
        });
    }
    let schema = FeatureSchema::new(mode, category_labels);
    let mut data = Vec::with_capacity(schema.len() * city.samples.len());
    for i in 0..city.samples.len() {
        featurize_sample(
            city,
            i,
            mode,
            category_labels.len(),
            masked_points.get(i),
            params,
            &mut data,
        )?;
    }
    let m = FeatureMatrix::new(schema, data)?;
    if let Some((row, column)) = m.find_non_finite() {
        return Err(Error::NonFinite { row, column });
    }
    Ok((m, city.labels()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    // 2012-04-07 (Saturday) 22:30 UTC
    const SAT_2230: i64 = 1_333_837_800;

    #[test]
    fn single_visit_frequency() {
        let f = temporal_features(&[Timestamp::new(0, 0)], 4, &[None]).unwrap();
        assert_eq!(f.log_visit_count, 0.0);
        assert_eq!(f.rel_visit_frequency, 0.25);
        assert_eq!(f.mean_log_duration_h, NO_SUCCESSOR_LOG_DURATION);
        assert!((NO_SUCCESSOR_LOG_DURATION - 24f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn two_hour_gap_duration() {
        // 18:00 local, next check-in at 20:00
        let v = Timestamp::new(1_333_476_000, 0); // 2012-04-03 18:00 UTC
        assert_eq!(v.local().hour, 18);
        let f = temporal_features(&[v], 2, &[Some(v.utc + 7200)]).unwrap();
        assert!((f.mean_log_duration_h - core::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(f.frac_evening, 1.0);
    }

    #[test]
    fn saturday_night() {
        let visits = [Timestamp::new(SAT_2230, 0), Timestamp::new(SAT_2230 + 7 * 86_400, 0)];
        let f = temporal_features(&visits, 2, &[None, None]).unwrap();
        assert_eq!(f.frac_weekend, 1.0);
        assert_eq!(f.frac_night, 1.0);
        assert_eq!(f.frac_evening, 0.0);
    }

    #[test]
    fn empty_visits_rejected() {
        assert!(temporal_features(&[], 1, &[]).is_err());
    }

    fn index(points: &[(f64, f64)]) -> SpatialIndex {
        SpatialIndex::build(points.iter().map(|&(x, y)| LocalPoint::new(x, y)).enumerate()).unwrap()
    }

    #[test]
    fn three_poi_example() {
        // A: 10 m Dining(0), B: 20 m Retail(1), C: 500 m Dining(0); three categories
        let idx = index(&[(10.0, 0.0), (0.0, 20.0), (-500.0, 0.0)]);
        let cats = [CategoryId(0), CategoryId(1), CategoryId(0)];
        let f = spatial_features(
            &LocalPoint::default(),
            &idx,
            &cats,
            3,
            &SpatialParams { k: 2, radius_m: 200.0 },
        )
        .unwrap();
        assert_eq!(f.knn_counts, vec![1, 1, 0]);
        assert!((f.knn_mean_distance - 15.0).abs() < 1e-12);
        assert_eq!(f.radius_counts, vec![1, 1, 0]);
        assert_eq!(f.radius_min_distance, vec![10.0, 20.0, 200.0]);
    }

    #[test]
    fn worked_example_counts_and_distances() {
        // p1: psi_3 at 50 m, p2: psi_2 at 10 m, p3: psi_2 at 80 m
        let idx = index(&[(50.0, 0.0), (0.0, 10.0), (0.0, -80.0)]);
        let cats = [CategoryId(2), CategoryId(1), CategoryId(1)];
        let f = spatial_features(&LocalPoint::default(), &idx, &cats, 3, &SpatialParams::default()).unwrap();
        assert_eq!(f.radius_counts, vec![0, 2, 1]);
        assert_eq!(f.radius_min_distance, vec![200.0, 10.0, 50.0]);
        assert_eq!(f.knn_counts.iter().sum::<u32>(), 3);
    }

    #[test]
    fn query_on_a_poi() {
        let idx = index(&[(5.0, 5.0), (100.0, 0.0)]);
        let cats = [CategoryId(1), CategoryId(0)];
        let f = spatial_features(&LocalPoint::new(5.0, 5.0), &idx, &cats, 2, &SpatialParams::default()).unwrap();
        assert_eq!(f.radius_min_distance[1], 0.0);
        assert!(f.radius_counts[1] >= 1);
    }

    #[test]
    fn schema_widths() {
        let labels: Vec<String> = (0..12).map(|i| alloc::format!("cat {i}")).collect();
        assert_eq!(FeatureSchema::new(FeatureMode::Temporal, &labels).len(), 10);
        assert_eq!(FeatureSchema::new(FeatureMode::Spatial, &labels).len(), 37);
        assert_eq!(FeatureSchema::new(FeatureMode::Spatiotemporal, &labels).len(), 47);
    }

    proptest! {
        #[test]
        fn temporal_invariants(
            times in proptest::collection::vec((0i64..2_000_000_000, -720i16..=840), 1..30),
            extra in 0usize..20,
        ) {
            let mut visits: Vec<Timestamp> = times.iter().map(|&(t, o)| Timestamp::new(t, o)).collect();
            visits.sort();
            visits.dedup_by_key(|v| v.utc);
            let succ: Vec<Option<i64>> = visits.windows(2).map(|w| Some(w[1].utc)).chain([None]).collect();
            let f = temporal_features(&visits, visits.len() + extra, &succ).unwrap();
            let parts = f.frac_morning + f.frac_afternoon + f.frac_evening + f.frac_night;
            prop_assert!((parts - 1.0).abs() < 1e-12);
            prop_assert!(f.rel_visit_frequency > 0.0 && f.rel_visit_frequency <= 1.0);
            prop_assert!(f.mean_sin_hour.powi(2) + f.mean_cos_hour.powi(2) <= 1.0 + 1e-12);
            for v in [f.frac_weekend, f.frac_morning, f.frac_afternoon, f.frac_evening, f.frac_night] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn spatial_invariants(
            pts in proptest::collection::vec((0.0f64..1000.0, 0.0f64..1000.0, 0u16..4), 1..200),
            qx in 0.0f64..1000.0,
            qy in 0.0f64..1000.0,
        ) {
            let idx = index(&pts.iter().map(|&(x, y, _)| (x, y)).collect::<Vec<_>>());
            let cats: Vec<CategoryId> = pts.iter().map(|&(_, _, c)| CategoryId(c)).collect();
            let params = SpatialParams::default();
            let f = spatial_features(&LocalPoint::new(qx, qy), &idx, &cats, 4, &params).unwrap();
            prop_assert_eq!(f.knn_counts.iter().sum::<u32>() as usize, params.k.min(pts.len()));
            for c in 0..4 {
                prop_assert_eq!(f.radius_min_distance[c] == params.radius_m, f.radius_counts[c] == 0);
                prop_assert!(f.radius_min_distance[c] >= 0.0 && f.radius_min_distance[c] <= params.radius_m);
            }
        }
    }
}

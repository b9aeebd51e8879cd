//! A single city's dataset in projected form, ready for featurization.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::{Poi, UserLocationSample};
use crate::error::{Error, Result};
use crate::geo::{centroid, GeoPoint, LocalPoint, Projection};
use crate::index::SpatialIndex;
use crate::taxonomy::CategoryId;

/// Every check-in time of one user, ascending.
#[derive(Debug, Clone, Default)]
pub struct UserTimeline {
    times: Vec<i64>,
}

impl UserTimeline {
    pub fn new(mut times: Vec<i64>) -> Self {
        times.sort_unstable();
        UserTimeline { times }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Earliest check-in strictly after `t`.
    pub fn successor(&self, t: i64) -> Option<i64> {
        let i = self.times.partition_point(|&x| x <= t);
        self.times.get(i).copied()
    }
}

#[derive(Debug, Clone)]
pub struct CityData {
    pub name: String,
    pub n_classes: usize,
    pub projection: Projection,
    pub samples: Vec<UserLocationSample>,
    /// True (unmasked) positions, aligned with `samples`.
    pub sample_points: Vec<LocalPoint>,
    pub pois: Vec<Poi>,
    pub poi_points: Vec<LocalPoint>,
    pub poi_categories: Vec<CategoryId>,
    /// Ids are indices into `pois`.
    pub poi_index: SpatialIndex,
    pub timelines: BTreeMap<String, UserTimeline>,
}

impl CityData {
    /// Projects everything around `anchor`, or the sample centroid when absent.
    pub fn new(
        name: impl Into<String>,
        samples: Vec<UserLocationSample>,
        pois: Vec<Poi>,
        n_classes: usize,
        anchor: Option<GeoPoint>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("city has no samples"));
        }
        for s in &samples {
            s.validate(n_classes)?;
        }
        if let Some(p) = pois.iter().find(|p| p.category.index() >= n_classes) {
            return Err(Error::UnknownCategory(alloc::format!(
                "{} on POI {}",
                p.category.0,
                p.id
            )));
        }
        let anchor = match anchor {
            Some(a) => a,
            None => centroid(samples.iter().map(|s| &s.geo)).expect("non-empty"),
        };
        let projection = Projection::new(anchor)?;
        let sample_points = samples
            .iter()
            .map(|s| projection.project(&s.geo))
            .collect::<Result<Vec<_>>>()?;
        let poi_points = pois
            .iter()
            .map(|p| projection.project(&p.geo))
            .collect::<Result<Vec<_>>>()?;
        let poi_index = SpatialIndex::build(poi_points.iter().copied().enumerate())?;
        let poi_categories = pois.iter().map(|p| p.category).collect();

        let mut times: BTreeMap<String, Vec<i64>> = BTreeMap::new();
        for s in &samples {
            times
                .entry(s.user_id.clone())
                .or_default()
                .extend(s.visits.iter().map(|v| v.utc));
        }
        let timelines = times.into_iter().map(|(u, t)| (u, UserTimeline::new(t))).collect();

        Ok(CityData {
            name: name.into(),
            n_classes,
            projection,
            samples,
            sample_points,
            pois,
            poi_points,
            poi_categories,
            poi_index,
            timelines,
        })
    }

    pub fn timeline(&self, user: &str) -> &UserTimeline {
        &self.timelines[user]
    }

    pub fn n_users(&self) -> usize {
        self.timelines.len()
    }

    pub fn labels(&self) -> Vec<CategoryId> {
        self.samples.iter().map(|s| s.category).collect()
    }

    /// Replaces the POI set (e.g. after subsampling or with external POIs).
    pub fn with_pois(mut self, pois: Vec<Poi>) -> Result<Self> {
        let poi_points = pois
            .iter()
            .map(|p| self.projection.project(&p.geo))
            .collect::<Result<Vec<_>>>()?;
        self.poi_index = SpatialIndex::build(poi_points.iter().copied().enumerate())?;
        self.poi_categories = pois.iter().map(|p| p.category).collect();
        self.poi_points = poi_points;
        self.pois = pois;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn successor_is_strict() {
        let t = UserTimeline::new(alloc::vec![30, 10, 20]);
        assert_eq!(t.successor(10), Some(20));
        assert_eq!(t.successor(15), Some(20));
        assert_eq!(t.successor(30), None);
        assert_eq!(t.successor(0), Some(10));
    }
}

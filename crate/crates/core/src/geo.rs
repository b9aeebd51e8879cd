//! Coordinates and the local metric projection used for all distance work.
//!
//! Every city is handled in its own tangent frame: an equirectangular
//! projection around an anchor point (usually the dataset centroid). At city
//! scale this stays well below a meter of error and it is trivially invertible.

use crate::error::{Error, Result};
use crate::math;
use core::f64::consts::PI;

/// Mean earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// WGS84 latitude/longitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = GeoPoint { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidCoordinate {
                lat: self.lat,
                lon: self.lon,
            })
        }
    }
}

/// Planar position in meters east (`x`) and north (`y`) of a city anchor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LocalPoint {
    pub x: f64,
    pub y: f64,
}

impl LocalPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        LocalPoint { x, y }
    }

    #[inline]
    pub fn distance(&self, other: &LocalPoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        math::sqrt(dx * dx + dy * dy)
    }

    #[inline]
    pub fn offset(&self, dx: f64, dy: f64) -> LocalPoint {
        LocalPoint::new(self.x + dx, self.y + dy)
    }
}

/// Equirectangular projection around a fixed anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Projection {
    anchor: GeoPoint,
    cos_lat: f64,
}

impl Projection {
    pub fn new(anchor: GeoPoint) -> Result<Self> {
        anchor.validate()?;
        Ok(Projection {
            anchor,
            cos_lat: math::cos(anchor.lat.to_radians()),
        })
    }

    pub fn anchor(&self) -> GeoPoint {
        self.anchor
    }

    pub fn project(&self, p: &GeoPoint) -> Result<LocalPoint> {
        p.validate()?;
        let mut dlon = p.lon - self.anchor.lon;
        if dlon > 180.0 {
            dlon -= 360.0;
        } else if dlon < -180.0 {
            dlon += 360.0;
        }
        let x = EARTH_RADIUS_M * dlon.to_radians() * self.cos_lat;
        let y = EARTH_RADIUS_M * (p.lat - self.anchor.lat).to_radians();
        Ok(LocalPoint::new(x, y))
    }

    pub fn unproject(&self, p: &LocalPoint) -> GeoPoint {
        let lat = self.anchor.lat + (p.y / EARTH_RADIUS_M) * 180.0 / PI;
        let mut lon = self.anchor.lon + (p.x / (EARTH_RADIUS_M * self.cos_lat)) * 180.0 / PI;
        if lon > 180.0 {
            lon -= 360.0;
        } else if lon < -180.0 {
            lon += 360.0;
        }
        GeoPoint { lat, lon }
    }
}

/// Arithmetic mean of latitudes and longitudes. Fine for a single city.
pub fn centroid<'a>(points: impl IntoIterator<Item = &'a GeoPoint>) -> Option<GeoPoint> {
    let (mut lat, mut lon, mut n) = (0.0, 0.0, 0usize);
    for p in points {
        lat += p.lat;
        lon += p.lon;
        n += 1;
    }
    (n > 0).then(|| GeoPoint {
        lat: lat / n as f64,
        lon: lon / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn haversine(a: &GeoPoint, b: &GeoPoint) -> f64 {
        let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
        let dp = p2 - p1;
        let dl = (b.lon - a.lon).to_radians();
        let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * h.sqrt().asin()
    }

    /// Point at `dist` meters along `bearing` (radians from north), great-circle.
    fn destination(a: &GeoPoint, bearing: f64, dist: f64) -> GeoPoint {
        let d = dist / EARTH_RADIUS_M;
        let (p1, l1) = (a.lat.to_radians(), a.lon.to_radians());
        let p2 = (p1.sin() * d.cos() + p1.cos() * d.sin() * bearing.cos()).asin();
        let l2 = l1 + (bearing.sin() * d.sin() * p1.cos()).atan2(d.cos() - p1.sin() * p2.sin());
        GeoPoint {
            lat: p2.to_degrees(),
            lon: l2.to_degrees(),
        }
    }

    #[test]
    fn anchor_projects_to_origin() {
        let proj = Projection::new(GeoPoint::new(40.0, -74.0).unwrap()).unwrap();
        let p = proj.project(&GeoPoint::new(40.0, -74.0).unwrap()).unwrap();
        assert_eq!(p, LocalPoint::new(0.0, 0.0));
    }

    #[test]
    fn hundred_meters_north() {
        let anchor = GeoPoint::new(40.0, -74.0).unwrap();
        let proj = Projection::new(anchor).unwrap();
        let q = GeoPoint::new(40.0 + 100.0 / 111_194.9, -74.0).unwrap();
        let p = proj.project(&q).unwrap();
        let oracle = haversine(&anchor, &q);
        assert!((oracle - 100.0).abs() < 0.01);
        assert!(p.x.abs() < 1e-9);
        assert!((p.y - oracle).abs() < 0.1, "{} vs {}", p.y, oracle);
    }

    #[test]
    fn five_hundred_meters_east_in_tokyo() {
        let anchor = GeoPoint::new(35.68, 139.69).unwrap();
        let proj = Projection::new(anchor).unwrap();
        let q = destination(&anchor, core::f64::consts::FRAC_PI_2, 500.0);
        assert!((haversine(&anchor, &q) - 500.0).abs() < 1e-6);
        let p = proj.project(&q).unwrap();
        assert!((p.x - 500.0).abs() < 1.0, "x = {}", p.x);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.5).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        let proj = Projection::new(GeoPoint::new(0.0, 0.0).unwrap()).unwrap();
        assert!(proj.project(&GeoPoint { lat: 100.0, lon: 0.0 }).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_within_half_meter(
            lat in -60.0f64..60.0,
            lon in -179.0f64..179.0,
            bearing in 0.0f64..(2.0 * PI),
            dist in 0.0f64..50_000.0,
        ) {
            let anchor = GeoPoint::new(lat, lon).unwrap();
            let proj = Projection::new(anchor).unwrap();
            let q = destination(&anchor, bearing, dist);
            let back = proj.unproject(&proj.project(&q).unwrap());
            prop_assert!(haversine(&q, &back) < 0.5);
        }

        #[test]
        fn local_distance_tracks_haversine(
            bearing in 0.0f64..(2.0 * PI),
            dist in 0.0f64..20_000.0,
        ) {
            let anchor = GeoPoint::new(40.73, -73.99).unwrap();
            let proj = Projection::new(anchor).unwrap();
            let q = destination(&anchor, bearing, dist);
            let d = proj.project(&q).unwrap().distance(&LocalPoint::default());
            prop_assert!((d - dist).abs() < 1e-3 * dist.max(1.0) + 1.0);
        }
    }
}

//! Coordinates on the sphere, great-circle distance, and the
//! accuracy-at-radius evaluation metric.

use crate::error::{Error, Result};

/// Mean Earth radius in kilometers (IUGG mean radius).
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Standard radius set (km) for accuracy reports.
pub const STANDARD_RADII_KM: [f64; 5] = [1.0, 25.0, 200.0, 750.0, 2500.0];

/// A latitude/longitude pair in degrees.
///
/// Latitude is restricted to `[-90, +90]`. Longitude is normalized into
/// `[-180, +180)` at construction, so `+180` becomes `-180` and every point
/// has a single canonical representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoCoordinate {
    lat_deg: f64,
    lon_deg: f64,
}

impl GeoCoordinate {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self> {
        if !lat_deg.is_finite() || !lon_deg.is_finite() {
            return Err(Error::InvalidCoordinate(format!(
                "non-finite lat/lon ({lat_deg}, {lon_deg})"
            )));
        }
        if !(-90.0..=90.0).contains(&lat_deg) {
            return Err(Error::InvalidCoordinate(format!(
                "latitude {lat_deg} outside [-90, 90]"
            )));
        }
        // already-canonical longitudes pass through bit-exact; the wrap
        // arithmetic below would perturb them
        let lon = if (-180.0..180.0).contains(&lon_deg) {
            lon_deg
        } else {
            let wrapped = (lon_deg + 180.0).rem_euclid(360.0) - 180.0;
            if wrapped >= 180.0 {
                -180.0
            } else {
                wrapped
            }
        };
        Ok(Self {
            lat_deg,
            lon_deg: lon,
        })
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat_deg
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon_deg
    }
}

impl std::fmt::Display for GeoCoordinate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.lat_deg, self.lon_deg)
    }
}

/// Great-circle distance in kilometers between two points, computed with the
/// haversine formula on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn great_circle_distance(a: GeoCoordinate, b: GeoCoordinate) -> f64 {
    let lat_a = a.lat_deg.to_radians();
    let lat_b = b.lat_deg.to_radians();
    let dlat = (b.lat_deg - a.lat_deg).to_radians();
    let dlon = (b.lon_deg - a.lon_deg).to_radians();

    let h = (dlat / 2.0).sin().powi(2) + lat_a.cos() * lat_b.cos() * (dlon / 2.0).sin().powi(2);
    // h can creep above 1.0 by rounding for near-antipodal pairs
    let c = 2.0 * h.min(1.0).sqrt().asin();
    EARTH_RADIUS_KM * c
}

/// One row of an accuracy report: the fraction of `n` samples whose
/// great-circle error is strictly below `radius_km`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyEntry {
    pub radius_km: f64,
    pub accuracy: f64,
    pub n: usize,
}

/// Accuracy at a list of strictly increasing radii over one sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyTable {
    pub entries: Vec<AccuracyEntry>,
}

impl AccuracyTable {
    pub fn accuracy_at_radius(&self, radius_km: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.radius_km == radius_km)
            .map(|e| e.accuracy)
    }
}

/// Computes the fraction of samples located within each radius.
///
/// A sample counts towards radius `r` iff its great-circle error is
/// strictly less than `r`; a sample sitting exactly on the boundary does
/// not count.
pub fn accuracy_at(
    samples: &[(GeoCoordinate, GeoCoordinate)],
    radii_km: &[f64],
) -> Result<AccuracyTable> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("accuracy_at needs at least one sample"));
    }
    validate_radii(radii_km)?;

    let n = samples.len();
    let errors: Vec<f64> = samples
        .iter()
        .map(|(gt, pred)| great_circle_distance(*gt, *pred))
        .collect();

    let entries = radii_km
        .iter()
        .map(|&r| {
            let hits = errors.iter().filter(|&&d| d < r).count();
            AccuracyEntry {
                radius_km: r,
                accuracy: hits as f64 / n as f64,
                n,
            }
        })
        .collect();
    Ok(AccuracyTable { entries })
}

fn validate_radii(radii_km: &[f64]) -> Result<()> {
    if radii_km.is_empty() {
        return Err(Error::EmptyInput("radius list"));
    }
    for window in radii_km.windows(2) {
        if window[1] <= window[0] {
            return Err(Error::InvalidParameter(format!(
                "radii must be strictly increasing, got {} after {}",
                window[1], window[0]
            )));
        }
    }
    if radii_km[0] <= 0.0 || radii_km.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidParameter(
            "radii must be positive and finite".into(),
        ));
    }
    Ok(())
}

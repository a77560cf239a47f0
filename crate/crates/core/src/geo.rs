//! WGS-84 geodetic coordinates and their earth-centered, earth-fixed image.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// WGS-84 semi-major axis in meters.
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS-84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("invalid coordinate: latitude {lat}, longitude {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
}

/// A point on the reference ellipsoid (height 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub latitude: f64,
    pub longitude: f64,
    /// ECEF coordinates in meters.
    pub ecef: [f64; 3],
}

impl GeoPoint {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self, GeoError> {
        let ecef = latlon_to_ecef(latitude, longitude)?;
        Ok(Self {
            latitude,
            longitude,
            ecef,
        })
    }

    /// Straight-line (chord) distance in meters.
    pub fn distance(&self, other: &GeoPoint) -> f64 {
        euclid(&self.ecef, &other.ecef)
    }

    /// Point on the equator whose chord distance from (0°, 0°) is `meters`
    /// (negative values go west). Handy for building exact 1-D layouts.
    pub fn on_equator(meters: f64) -> Self {
        let lon = 2.0 * (meters / (2.0 * WGS84_A)).asin();
        Self::new(0.0, lon.to_degrees()).expect("equator offsets stay in range")
    }
}

pub(crate) fn euclid(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Geodetic latitude/longitude (degrees, height 0) to ECEF meters.
pub fn latlon_to_ecef(lat: f64, lon: f64) -> Result<[f64; 3], GeoError> {
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(GeoError::InvalidCoordinate { lat, lon });
    }
    let e2 = WGS84_F * (2.0 - WGS84_F);
    let phi = lat.to_radians();
    let lam = lon.to_radians();
    let (sin_phi, cos_phi) = phi.sin_cos();
    let (sin_lam, cos_lam) = lam.sin_cos();
    let n = WGS84_A / (1.0 - e2 * sin_phi * sin_phi).sqrt();
    Ok([
        n * cos_phi * cos_lam,
        n * cos_phi * sin_lam,
        n * (1.0 - e2) * sin_phi,
    ])
}

//! Great-circle geodesy: bearings between GPS points, haversine distance,
//! and compass-angle comparisons.
//!
//! All angles are degrees. Bearings are measured clockwise from true north
//! and normalized to `[0, 360)`. The Earth model is a sphere of mean radius
//! 6 371 008.8 m, which is more than accurate enough for the tens-to-hundreds
//! of meters separating cameras in this setting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Float;

/// Mean Earth radius in meters (IUGG).
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Two points closer than this (degrees, per coordinate) are treated as
/// coincident and have no defined bearing.
pub const COINCIDENT_EPS_DEG: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    #[error("invalid longitude {0}: must be within [-180, 180]")]
    InvalidLongitude(f64),
    #[error("invalid latitude {0}: must be within [-90, 90]")]
    InvalidLatitude(f64),
    #[error("bearing is undefined for coincident points")]
    DegenerateGeometry,
}

/// A longitude/latitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint<T> {
    longitude: T,
    latitude: T,
}

impl<T: Float> GeoPoint<T> {
    /// Builds a point, rejecting out-of-range coordinates.
    pub fn new(longitude: T, latitude: T) -> Result<Self, GeoError> {
        let lon_lim = T::from_f64(180.0);
        let lat_lim = T::from_f64(90.0);
        if !(longitude >= -lon_lim && longitude <= lon_lim) {
            return Err(GeoError::InvalidLongitude(longitude.to_f64()));
        }
        if !(latitude >= -lat_lim && latitude <= lat_lim) {
            return Err(GeoError::InvalidLatitude(latitude.to_f64()));
        }
        Ok(Self { longitude, latitude })
    }

    pub fn longitude(&self) -> T {
        self.longitude
    }

    pub fn latitude(&self) -> T {
        self.latitude
    }

    fn coincides_with(&self, other: &Self) -> bool {
        let eps = T::from_f64(COINCIDENT_EPS_DEG);
        (self.longitude - other.longitude).abs() <= eps
            && (self.latitude - other.latitude).abs() <= eps
    }
}

/// A compass heading in degrees, clockwise from true north, in `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bearing<T> {
    degrees: T,
}

impl<T: Float> Bearing<T> {
    /// Wraps any angle into `[0, 360)`.
    pub fn new(degrees: T) -> Self {
        let full = T::from_f64(360.0);
        let mut d = degrees % full;
        if d < T::zero() {
            d += full;
        }
        // `-1e-17 % 360.0` rounds back up to 360.0; fold it to 0.
        if d >= full {
            d = T::zero();
        }
        Self { degrees: d }
    }

    pub fn degrees(&self) -> T {
        self.degrees
    }

    /// Heading rotated by `delta` degrees, re-normalized.
    pub fn rotated(&self, delta: T) -> Self {
        Self::new(self.degrees + delta)
    }

    /// The reverse direction (180 degrees away).
    pub fn opposite(&self) -> Self {
        self.rotated(T::from_f64(180.0))
    }
}

/// Initial great-circle bearing from `a` toward `b`.
///
/// Computed as `atan2(X, Y)` with
/// `X = sin(dlon) * cos(lat2)` and
/// `Y = cos(lat1) * sin(lat2) - sin(lat1) * cos(lat2) * cos(dlon)`,
/// mapped to `[0, 360)`.
pub fn bearing<T: Float>(a: GeoPoint<T>, b: GeoPoint<T>) -> Result<Bearing<T>, GeoError> {
    if a.coincides_with(&b) {
        return Err(GeoError::DegenerateGeometry);
    }
    let lon1 = a.longitude().to_radians();
    let lat1 = a.latitude().to_radians();
    let lon2 = b.longitude().to_radians();
    let lat2 = b.latitude().to_radians();
    let dlon = lon2 - lon1;
    let x = dlon.sin() * lat2.cos();
    let y = lat1.cos() * lat2.sin() - lat1.sin() * lat2.cos() * dlon.cos();
    Ok(Bearing::new(x.atan2(y).to_degrees()))
}

/// Haversine distance in meters on the mean-radius sphere.
pub fn great_circle_distance<T: Float>(a: GeoPoint<T>, b: GeoPoint<T>) -> T {
    let lat1 = a.latitude().to_radians();
    let lat2 = b.latitude().to_radians();
    let dlat = (b.latitude() - a.latitude()).to_radians();
    let dlon = (b.longitude() - a.longitude()).to_radians();
    let half = T::from_f64(0.5);
    let s1 = (dlat * half).sin();
    let s2 = (dlon * half).sin();
    let h = s1 * s1 + lat1.cos() * lat2.cos() * s2 * s2;
    let two = T::from_f64(2.0);
    T::from_f64(EARTH_RADIUS_M) * two * h.sqrt().min(T::one()).asin()
}

/// Smallest angle between two headings, in `[0, 180]`.
pub fn angular_difference<T: Float>(h1: Bearing<T>, h2: Bearing<T>) -> T {
    let diff = (h1.degrees() - h2.degrees()).abs();
    let full = T::from_f64(360.0);
    diff.min(full - diff)
}

/// Whether two headings agree within `tolerance` degrees.
pub fn headings_equivalent<T: Float>(h1: Bearing<T>, h2: Bearing<T>, tolerance: T) -> bool {
    angular_difference(h1, h2) <= tolerance
}

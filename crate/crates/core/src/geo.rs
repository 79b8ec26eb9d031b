//! Geographic points and great-circle distance.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::GeoError;

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Largest possible great-circle distance (half the circumference), in kilometres.
pub const MAX_GREAT_CIRCLE_KM: f64 = std::f64::consts::PI * EARTH_RADIUS_KM;

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint<T>", into = "RawPoint<T>")]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct GeoPoint<T: Real = f64> {
    latitude: T,
    longitude: T,
}

#[derive(Serialize, Deserialize)]
struct RawPoint<T> {
    lat: T,
    lon: T,
}

impl<T: Real> TryFrom<RawPoint<T>> for GeoPoint<T> {
    type Error = GeoError;

    fn try_from(raw: RawPoint<T>) -> Result<Self, Self::Error> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl<T: Real> From<GeoPoint<T>> for RawPoint<T> {
    fn from(p: GeoPoint<T>) -> Self {
        RawPoint { lat: p.latitude, lon: p.longitude }
    }
}

impl<T: Real> GeoPoint<T> {
    /// Builds a point, rejecting non-finite or out-of-range coordinates.
    pub fn new(latitude: T, longitude: T) -> Result<Self, GeoError> {
        let lat_ok = latitude.is_finite() && latitude.abs() <= T::lit(90.0);
        let lon_ok = longitude.is_finite() && longitude.abs() <= T::lit(180.0);
        if !lat_ok || !lon_ok {
            return Err(GeoError::CoordinateOutOfRange {
                latitude: latitude.to_f64().unwrap_or(f64::NAN),
                longitude: longitude.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { latitude, longitude })
    }

    pub fn latitude(&self) -> T {
        self.latitude
    }

    pub fn longitude(&self) -> T {
        self.longitude
    }
}

/// Haversine great-circle distance in kilometres on a sphere of radius
/// [`EARTH_RADIUS_KM`].
///
/// The result lies in `[0, π·R]` and is exactly symmetric in its arguments.
pub fn haversine_km<T: Real>(a: &GeoPoint<T>, b: &GeoPoint<T>) -> T {
    let two = T::lit(2.0);
    let phi1 = a.latitude.to_radians();
    let phi2 = b.latitude.to_radians();
    let half_dphi = (phi2 - phi1).abs() / two;
    let half_dlambda = (b.longitude - a.longitude).abs().to_radians() / two;
    let v = half_dphi.sin().powi(2) + phi1.cos() * phi2.cos() * half_dlambda.sin().powi(2);
    let v = v.max(T::zero()).min(T::one());
    two * T::lit(EARTH_RADIUS_KM) * v.sqrt().asin()
}

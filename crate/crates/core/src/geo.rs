//! Great-circle distance on a spherical Earth.

use core::cmp::Ordering;
use core::f64::consts::PI;
use core::fmt;

/// Mean Earth radius (IUGG, 6371.0088 km) in statute miles.
pub const EARTH_RADIUS_MILES: f64 = 3958.7613;

/// Largest possible separation on the sphere: half the circumference.
pub const MAX_SEPARATION_MILES: f64 = PI * EARTH_RADIUS_MILES;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeoError {
    Latitude(f64),
    Longitude(f64),
    Miles(f64),
}

impl fmt::Display for GeoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeoError::Latitude(v) => write!(f, "latitude {v} outside [-90, 90]"),
            GeoError::Longitude(v) => write!(f, "longitude {v} outside [-180, 180]"),
            GeoError::Miles(v) => write!(f, "distance {v} is not a finite nonnegative number"),
        }
    }
}

impl core::error::Error for GeoError {}

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coordinate {
    lat: f64,
    lon: f64,
}

impl Coordinate {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::Latitude(lat));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::Longitude(lon));
        }
        Ok(Coordinate { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// Position on the unit sphere. Chord length between two embeddings is
    /// `2 sin(d / 2R)`, monotone in the great-circle distance `d`.
    pub fn to_unit_vector(&self) -> [f64; 3] {
        let lat = self.lat.to_radians();
        let lon = self.lon.to_radians();
        let cos_lat = libm::cos(lat);
        [cos_lat * libm::cos(lon), cos_lat * libm::sin(lon), libm::sin(lat)]
    }

    /// Bit-level key, used for exact-equality grouping and canonical ordering.
    pub fn bits(&self) -> (u64, u64) {
        (self.lat.to_bits(), self.lon.to_bits())
    }
}

/// A nonnegative, finite distance in statute miles.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Miles(f64);

impl Miles {
    pub const ZERO: Miles = Miles(0.0);

    pub fn new(value: f64) -> Result<Self, GeoError> {
        if value.is_finite() && value >= 0.0 {
            // normalise -0.0
            Ok(Miles(value + 0.0))
        } else {
            Err(GeoError::Miles(value))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl Eq for Miles {}

impl PartialOrd for Miles {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Miles {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for Miles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Haversine great-circle distance on a sphere of radius [`EARTH_RADIUS_MILES`].
///
/// The arguments are put in a canonical order first so that the result is
/// bit-for-bit symmetric.
pub fn haversine_miles(a: Coordinate, b: Coordinate) -> Miles {
    let (p, q) = if a.bits() <= b.bits() { (a, b) } else { (b, a) };
    let lat1 = p.lat.to_radians();
    let lat2 = q.lat.to_radians();
    let half_dlat = (lat2 - lat1) * 0.5;
    let half_dlon = (q.lon - p.lon).to_radians() * 0.5;

    let s_lat = libm::sin(half_dlat);
    let s_lon = libm::sin(half_dlon);
    let h = s_lat * s_lat + libm::cos(lat1) * libm::cos(lat2) * s_lon * s_lon;
    let h = h.clamp(0.0, 1.0);
    let d = 2.0 * EARTH_RADIUS_MILES * libm::asin(libm::sqrt(h));
    Miles(d.min(MAX_SEPARATION_MILES))
}

/// Chord length on the unit sphere corresponding to a great-circle distance.
pub(crate) fn miles_to_chord(d: Miles) -> f64 {
    2.0 * libm::sin(d.0 / (2.0 * EARTH_RADIUS_MILES))
}

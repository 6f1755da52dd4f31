//! WGS84 geodesy and planar geometry primitives.
//!
//! All angles are radians internally; degrees appear only at serialization
//! boundaries. Distances use a spherical Earth with mean radius
//! [`EARTH_RADIUS_M`] — sub-decimeter error at the ≤150 m working distances
//! of the labeling pipeline, well below street-level GPS noise.

use std::f64::consts::{PI, TAU};

use thiserror::Error;

/// Mean Earth radius in meters (IUGG mean radius R1).
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    /// Bearing between coincident points is undefined.
    #[error("degenerate bearing: points coincide")]
    DegenerateBearing,
    /// Point-to-segment projection needs a segment of positive length.
    #[error("zero-length segment")]
    ZeroLengthSegment,
    #[error("latitude {0} out of range [-pi/2, pi/2]")]
    LatitudeOutOfRange(f64),
    #[error("non-finite coordinate")]
    NonFinite,
}

/// A WGS84 coordinate. `lat` in [-π/2, π/2], `lon` normalized to [-π, π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    /// Builds a point from radians, normalizing longitude into [-π, π).
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(GeoError::NonFinite);
        }
        if !(-PI / 2.0..=PI / 2.0).contains(&lat) {
            return Err(GeoError::LatitudeOutOfRange(lat));
        }
        Ok(Self {
            lat,
            lon: wrap_half_open(lon),
        })
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64) -> Result<Self, GeoError> {
        Self::new(lat_deg.to_radians(), lon_deg.to_radians())
    }

    #[inline]
    pub fn lat(&self) -> f64 {
        self.lat
    }

    #[inline]
    pub fn lon(&self) -> f64 {
        self.lon
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat.to_degrees()
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon.to_degrees()
    }
}

/// Planar offset from a local frame origin, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalVec {
    pub east: f64,
    pub north: f64,
}

impl LocalVec {
    pub fn new(east: f64, north: f64) -> Self {
        Self { east, north }
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.east.hypot(self.north)
    }

    #[inline]
    pub fn dot(&self, other: &LocalVec) -> f64 {
        self.east * other.east + self.north * other.north
    }

    /// z-component of the 2D cross product; positive when `other` is
    /// counterclockwise (left) of `self`.
    #[inline]
    pub fn cross(&self, other: &LocalVec) -> f64 {
        self.east * other.north - self.north * other.east
    }

    #[inline]
    pub fn sub(&self, other: &LocalVec) -> LocalVec {
        LocalVec::new(self.east - other.east, self.north - other.north)
    }
}

/// Compass bearing: radians clockwise from true north, normalized to [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Bearing(f64);

impl Bearing {
    /// Normalizes any finite angle into [0, 2π).
    pub fn from_radians(value: f64) -> Self {
        Self(wrap_bearing(value))
    }

    pub fn from_degrees(value: f64) -> Self {
        Self::from_radians(value.to_radians())
    }

    #[inline]
    pub fn radians(&self) -> f64 {
        self.0
    }

    pub fn degrees(&self) -> f64 {
        self.0.to_degrees()
    }

    /// The reverse bearing, normalized.
    pub fn opposite(&self) -> Bearing {
        Bearing::from_radians(self.0 + PI)
    }
}

fn wrap_bearing(value: f64) -> f64 {
    let w = value.rem_euclid(TAU);
    // rem_euclid can return exactly TAU after rounding for tiny negatives.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

fn wrap_half_open(value: f64) -> f64 {
    let w = (value + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// Great-circle distance in meters between two points.
pub fn haversine_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let dlat = b.lat - a.lat;
    let dlon = wrap_half_open(b.lon - a.lon);
    let h = (dlat * 0.5).sin().powi(2)
        + a.lat.cos() * b.lat.cos() * (dlon * 0.5).sin().powi(2);
    let central = 2.0 * h.sqrt().atan2((1.0 - h).sqrt());
    EARTH_RADIUS_M * central
}

/// Forward azimuth at `a` toward `b`. Errors on coincident points.
pub fn initial_bearing(a: &GeoPoint, b: &GeoPoint) -> Result<Bearing, GeoError> {
    if a == b {
        return Err(GeoError::DegenerateBearing);
    }
    let dlon = b.lon - a.lon;
    let y = dlon.sin() * b.lat.cos();
    let x = a.lat.cos() * b.lat.sin() - a.lat.sin() * b.lat.cos() * dlon.cos();
    Ok(Bearing::from_radians(y.atan2(x)))
}

/// Equirectangular projection of `p` into the local planar frame at `origin`.
///
/// Valid for |p − origin| under ~5 km; callers enforce the bound. East is
/// scaled by cos(origin latitude), so the frame is exact along the origin
/// parallel and degrades slowly away from it.
pub fn to_local(origin: &GeoPoint, p: &GeoPoint) -> LocalVec {
    let dlon = wrap_half_open(p.lon - origin.lon);
    LocalVec::new(
        EARTH_RADIUS_M * dlon * origin.lat.cos(),
        EARTH_RADIUS_M * (p.lat - origin.lat),
    )
}

/// Signed angular residual `a − b` wrapped into [−π, π).
///
/// Positive means `a` is clockwise of `b` (both interpreted as compass
/// angles).
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b + PI).rem_euclid(TAU) - PI;
    if d >= PI {
        -PI
    } else {
        d
    }
}

/// Closest point on segment [s0, s1] to `p`.
///
/// Returns (closest point, clamped parameter t in [0,1], distance).
pub fn project_point_to_segment(
    p: &LocalVec,
    s0: &LocalVec,
    s1: &LocalVec,
) -> Result<(LocalVec, f64, f64), GeoError> {
    let d = s1.sub(s0);
    let len2 = d.dot(&d);
    if len2 == 0.0 {
        return Err(GeoError::ZeroLengthSegment);
    }
    let t = (p.sub(s0).dot(&d) / len2).clamp(0.0, 1.0);
    let closest = LocalVec::new(s0.east + t * d.east, s0.north + t * d.north);
    Ok((closest, t, p.sub(&closest).norm()))
}

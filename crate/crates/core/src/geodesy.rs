//! WGS84 transforms between geodetic, ECEF and local East-North-Up frames.
//!
//! All angles are radians. Degrees only appear at file boundaries.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeodesyError {
    #[error("point ({x}, {y}, {z}) is too close to the Earth's center for a geodetic solution")]
    NearSingularity { x: f64, y: f64, z: f64 },
    #[error("invalid geodetic coordinate: lat={lat}, lon={lon}, height={height}")]
    InvalidGeodetic { lat: f64, lon: f64, height: f64 },
}

/// Ellipsoid parameters. `e2` is derived from the two axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wgs84Constants {
    pub a: f64,
    pub b: f64,
    pub e2: f64,
}

impl Wgs84Constants {
    pub const fn new() -> Self {
        const A: f64 = 6_378_137.0;
        const B: f64 = 6_356_752.314_2;
        Self {
            a: A,
            b: B,
            e2: (A * A - B * B) / (A * A),
        }
    }
}

impl Default for Wgs84Constants {
    fn default() -> Self {
        Self::new()
    }
}

pub const WGS84: Wgs84Constants = Wgs84Constants::new();

/// Latitude, longitude (radians) and ellipsoidal height (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodeticCoord {
    pub lat: f64,
    pub lon: f64,
    pub height: f64,
}

impl GeodeticCoord {
    pub fn new(lat: f64, lon: f64, height: f64) -> Result<Self, GeodesyError> {
        let g = Self { lat, lon, height };
        if g.is_valid() {
            Ok(g)
        } else {
            Err(GeodesyError::InvalidGeodetic { lat, lon, height })
        }
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64, height: f64) -> Result<Self, GeodesyError> {
        Self::new(lat_deg.to_radians(), lon_deg.to_radians(), height)
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && self.height.is_finite()
            && self.lat.abs() <= FRAC_PI_2
            && self.lon.abs() <= PI
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat.to_degrees()
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon.to_degrees()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcefCoord {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EcefCoord {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// Position in a local tangent frame anchored at some reference origin.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalEnu {
    pub east: f64,
    pub north: f64,
    pub up: f64,
}

impl LocalEnu {
    pub fn new(east: f64, north: f64, up: f64) -> Self {
        Self { east, north, up }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.east, self.north, self.up)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// Prime-vertical radius of curvature at `lat`.
pub fn normal_radius(lat: f64) -> f64 {
    let s = lat.sin();
    WGS84.a / (1.0 - WGS84.e2 * s * s).sqrt()
}

pub fn geodetic_to_ecef(g: &GeodeticCoord) -> EcefCoord {
    let rn = normal_radius(g.lat);
    let (sin_lat, cos_lat) = g.lat.sin_cos();
    let (sin_lon, cos_lon) = g.lon.sin_cos();
    EcefCoord {
        x: (rn + g.height) * cos_lat * cos_lon,
        y: (rn + g.height) * cos_lat * sin_lon,
        z: (rn * (1.0 - WGS84.e2) + g.height) * sin_lat,
    }
}

const MAX_LAT_ITERATIONS: usize = 10;
const LAT_TOLERANCE: f64 = 1e-12;
const MIN_RADIUS: f64 = 1000.0;

/// Inverse of [`geodetic_to_ecef`] by latitude fix-point iteration from a
/// Bowring starting value.
pub fn ecef_to_geodetic(p: &EcefCoord) -> Result<GeodeticCoord, GeodesyError> {
    let Wgs84Constants { a, b, e2 } = WGS84;
    let rho = p.x.hypot(p.y);
    let r = rho.hypot(p.z);
    if !r.is_finite() || r < MIN_RADIUS {
        return Err(GeodesyError::NearSingularity {
            x: p.x,
            y: p.y,
            z: p.z,
        });
    }

    // On the polar axis longitude is undefined; report 0.
    if rho < 1e-9 {
        let lat = FRAC_PI_2.copysign(p.z);
        return Ok(GeodeticCoord {
            lat,
            lon: 0.0,
            height: p.z.abs() - b,
        });
    }
    let lon = p.y.atan2(p.x);

    let ep2 = (a * a - b * b) / (b * b);
    let beta = (a * p.z).atan2(b * rho);
    let (sb, cb) = beta.sin_cos();
    let mut lat = (p.z + ep2 * b * sb * sb * sb).atan2(rho - e2 * a * cb * cb * cb);

    for _ in 0..MAX_LAT_ITERATIONS {
        let rn = normal_radius(lat);
        let h = height_at(rho, p.z, lat, rn);
        let next = (p.z * (rn + h)).atan2(rho * (rn * (1.0 - e2) + h));
        let done = (next - lat).abs() < LAT_TOLERANCE;
        lat = next;
        if done {
            break;
        }
    }
    let height = height_at(rho, p.z, lat, normal_radius(lat));
    Ok(GeodeticCoord { lat, lon, height })
}

// Height from whichever projection is better conditioned at this latitude.
fn height_at(rho: f64, z: f64, lat: f64, rn: f64) -> f64 {
    let (s, c) = lat.sin_cos();
    if c.abs() > s.abs() {
        rho / c - rn
    } else {
        z / s - rn * (1.0 - WGS84.e2)
    }
}

/// Rotation taking ECEF vectors into the local ENU frame at `origin`.
/// Rows are the east, north and up unit vectors.
pub fn enu_rotation(origin: &GeodeticCoord) -> Matrix3<f64> {
    let (sin_lat, cos_lat) = origin.lat.sin_cos();
    let (sin_lon, cos_lon) = origin.lon.sin_cos();
    Matrix3::new(
        -sin_lon,
        cos_lon,
        0.0,
        -sin_lat * cos_lon,
        -sin_lat * sin_lon,
        cos_lat,
        cos_lat * cos_lon,
        cos_lat * sin_lon,
        sin_lat,
    )
}

pub fn ecef_to_enu(p: &EcefCoord, origin: &GeodeticCoord) -> LocalEnu {
    let o = geodetic_to_ecef(origin).to_vector();
    LocalEnu::from_vector(&(enu_rotation(origin) * (p.to_vector() - o)))
}

pub fn enu_to_ecef(l: &LocalEnu, origin: &GeodeticCoord) -> EcefCoord {
    let o = geodetic_to_ecef(origin).to_vector();
    EcefCoord::from_vector(&(enu_rotation(origin).transpose() * l.to_vector() + o))
}

pub fn geodetic_to_enu(g: &GeodeticCoord, origin: &GeodeticCoord) -> LocalEnu {
    ecef_to_enu(&geodetic_to_ecef(g), origin)
}

pub fn enu_to_geodetic(
    l: &LocalEnu,
    origin: &GeodeticCoord,
) -> Result<GeodeticCoord, GeodesyError> {
    ecef_to_geodetic(&enu_to_ecef(l, origin))
}

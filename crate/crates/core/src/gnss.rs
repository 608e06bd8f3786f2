//! GNSS position fixes as local-frame observations.

use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

use crate::geodesy::{geodetic_to_enu, GeodeticCoord, LocalEnu};
use crate::strapdown::NavState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GnssError {
    #[error("GNSS noise sigmas must be positive and finite, got ({0}, {1}, {2})")]
    InvalidNoise(f64, f64, f64),
}

/// A geodetic position fix. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnssFix {
    pub t: f64,
    pub lat: f64,
    pub lon: f64,
    pub alt: f64,
    /// Per-axis (east, north, up) standard deviation, when the receiver reports one.
    pub std: Option<Vector3<f64>>,
}

impl GnssFix {
    pub fn new(t: f64, lat: f64, lon: f64, alt: f64) -> Self {
        Self {
            t,
            lat,
            lon,
            alt,
            std: None,
        }
    }

    pub fn from_degrees(t: f64, lat_deg: f64, lon_deg: f64, alt: f64) -> Self {
        Self::new(t, lat_deg.to_radians(), lon_deg.to_radians(), alt)
    }

    pub fn geodetic(&self) -> GeodeticCoord {
        GeodeticCoord {
            lat: self.lat,
            lon: self.lon,
            height: self.alt,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.t.is_finite() && self.geodetic().is_valid()
    }
}

/// Per-axis GNSS standard deviations in the local frame, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnssNoise {
    pub sigma_e: f64,
    pub sigma_n: f64,
    pub sigma_u: f64,
}

impl GnssNoise {
    pub fn new(sigma_e: f64, sigma_n: f64, sigma_u: f64) -> Self {
        Self {
            sigma_e,
            sigma_n,
            sigma_u,
        }
    }

    pub fn uniform(sigma: f64) -> Self {
        Self::new(sigma, sigma, sigma)
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.sigma_e, self.sigma_n, self.sigma_u)
    }
}

impl Default for GnssNoise {
    fn default() -> Self {
        Self::uniform(13.0)
    }
}

pub fn fix_to_local(f: &GnssFix, origin: &GeodeticCoord) -> LocalEnu {
    geodetic_to_enu(&f.geodetic(), origin)
}

/// Position part of the state.
pub fn measurement_fn(s: &NavState) -> DVector<f64> {
    DVector::from_column_slice(s.position.as_slice())
}

pub fn measurement_cov(n: &GnssNoise) -> Result<DMatrix<f64>, GnssError> {
    let v = n.as_vector();
    if !v.iter().all(|s| s.is_finite() && *s > 0.0) {
        return Err(GnssError::InvalidNoise(v.x, v.y, v.z));
    }
    Ok(DMatrix::from_diagonal(&DVector::from_column_slice(
        v.component_mul(&v).as_slice(),
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::WGS84;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fix_at_origin_is_zero() {
        let o = GeodeticCoord::from_degrees(49.0, 8.43, 115.0).unwrap();
        let f = GnssFix::new(0.0, o.lat, o.lon, o.height);
        assert_eq!(fix_to_local(&f, &o), LocalEnu::default());
    }

    #[test]
    fn vertical_offset() {
        let o = GeodeticCoord::from_degrees(49.0, 8.43, 115.0).unwrap();
        let f = GnssFix::new(0.0, o.lat, o.lon, o.height + 5.0);
        let l = fix_to_local(&f, &o);
        assert_abs_diff_eq!(l.east, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(l.north, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(l.up, 5.0, epsilon = 1e-6);
    }

    #[test]
    fn longitude_step_at_equator() {
        let o = GeodeticCoord::new(0.0, 0.0, 0.0).unwrap();
        let f = GnssFix::new(0.0, 0.0, 1e-5, 0.0);
        let l = fix_to_local(&f, &o);
        // chord a*sin(eps) vs arc a*eps differ by ~1e-10 m here
        assert_abs_diff_eq!(l.east, WGS84.a * 1e-5, epsilon = 1e-3);
        assert_abs_diff_eq!(l.north, 0.0, epsilon = 1e-3);
    }

    #[test]
    fn measurement_is_position_projection() {
        let mut s = NavState::default();
        assert_eq!(measurement_fn(&s), DVector::zeros(3));
        s.position = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(measurement_fn(&s).as_slice(), &[1.0, 2.0, 3.0]);
        let mut other = s;
        other.velocity = Vector3::new(9.0, 9.0, 9.0);
        other.gyro_bias = Vector3::new(0.1, 0.1, 0.1);
        assert_eq!(measurement_fn(&other), measurement_fn(&s));
    }

    #[test]
    fn covariance_diagonal() {
        assert_eq!(
            measurement_cov(&GnssNoise::uniform(1.0)).unwrap(),
            DMatrix::identity(3, 3)
        );
        let r = measurement_cov(&GnssNoise::new(2.0, 3.0, 4.0)).unwrap();
        assert_eq!(r.diagonal().as_slice(), &[4.0, 9.0, 16.0]);
        let r2 = measurement_cov(&GnssNoise::new(4.0, 6.0, 8.0)).unwrap();
        assert_eq!(r2, r * 4.0);
    }

    #[test]
    fn nonpositive_sigma_rejected() {
        assert!(matches!(
            measurement_cov(&GnssNoise::new(1.0, 0.0, 1.0)),
            Err(GnssError::InvalidNoise(..))
        ));
        assert!(measurement_cov(&GnssNoise::new(-1.0, 1.0, 1.0)).is_err());
    }
}

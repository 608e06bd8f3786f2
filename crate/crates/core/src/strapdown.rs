//! Strapdown inertial propagation in a local ENU frame.
//!
//! The nominal state carries a unit quaternion; the filter sees a 15-dim error
//! state `[dp, dv, dtheta, dbg, dba]` where `dtheta` is a body-frame rotation
//! vector applied as `q * exp(dtheta)`.

use nalgebra::{DMatrix, DVector, Quaternion, UnitQuaternion, Vector3};

use crate::geodesy::LocalEnu;
use crate::ukf::SigmaState;

/// Standard gravity, m/s^2.
pub const GRAVITY: f64 = 9.80665;

/// Dimension of the error state.
pub const ERROR_DIM: usize = 15;

pub const POS: usize = 0;
pub const VEL: usize = 3;
pub const ATT: usize = 6;
pub const GYRO_BIAS: usize = 9;
pub const ACCEL_BIAS: usize = 12;

pub fn gravity_enu() -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -GRAVITY)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Body to ENU.
    pub orientation: UnitQuaternion<f64>,
    pub gyro_bias: Vector3<f64>,
    pub accel_bias: Vector3<f64>,
}

impl Default for NavState {
    fn default() -> Self {
        Self {
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
            gyro_bias: Vector3::zeros(),
            accel_bias: Vector3::zeros(),
        }
    }
}

impl NavState {
    pub fn local_position(&self) -> LocalEnu {
        LocalEnu::from_vector(&self.position)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.orientation.coords.iter().all(|v| v.is_finite())
            && self.gyro_bias.iter().all(|v| v.is_finite())
            && self.accel_bias.iter().all(|v| v.is_finite())
    }
}

/// One IMU reading in the body frame: angular rate (rad/s) and specific
/// force (m/s^2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    pub gyro: Vector3<f64>,
    pub accel: Vector3<f64>,
}

impl ImuSample {
    pub fn new(t: f64, gyro: Vector3<f64>, accel: Vector3<f64>) -> Self {
        Self { t, gyro, accel }
    }
}

/// White-noise densities and bias random-walk intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuNoiseParams {
    /// rad/s
    pub gyro_std: f64,
    /// m/s^2
    pub accel_std: f64,
    /// rad/s^2
    pub gyro_bias_rw: f64,
    /// m/s^3
    pub accel_bias_rw: f64,
}

impl Default for ImuNoiseParams {
    fn default() -> Self {
        Self {
            gyro_std: 0.01,
            accel_std: 0.05,
            gyro_bias_rw: 1e-6,
            accel_bias_rw: 1e-4,
        }
    }
}

impl ImuNoiseParams {
    pub fn zero() -> Self {
        Self {
            gyro_std: 0.0,
            accel_std: 0.0,
            gyro_bias_rw: 0.0,
            accel_bias_rw: 0.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.gyro_std, self.accel_std, self.gyro_bias_rw, self.accel_bias_rw]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Quaternion exponential of a rotation vector.
pub fn quat_from_rotvec(r: &Vector3<f64>) -> UnitQuaternion<f64> {
    let theta2 = r.norm_squared();
    let theta = theta2.sqrt();
    let q = if theta < 1e-8 {
        let v = r * 0.5;
        Quaternion::new(1.0 - theta2 / 8.0, v.x, v.y, v.z)
    } else {
        let half = 0.5 * theta;
        let v = r * (half.sin() / theta);
        Quaternion::new(half.cos(), v.x, v.y, v.z)
    };
    UnitQuaternion::new_normalize(q)
}

/// Quaternion logarithm, the inverse of [`quat_from_rotvec`] on the short arc.
pub fn rotvec_from_quat(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let q = if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        *q
    };
    let v = q.imag();
    let s = v.norm();
    if s < 1e-8 {
        // 2 v / w to first order
        return v * (2.0 / q.w);
    }
    v * (2.0 * s.atan2(q.w) / s)
}

/// Deterministic strapdown step over `dt` using the sample taken at the start
/// of the interval.
pub fn propagate(s: &NavState, u: &ImuSample, dt: f64) -> NavState {
    let omega = u.gyro - s.gyro_bias;
    let accel = u.accel - s.accel_bias;
    let a_nav = s.orientation * accel + gravity_enu();

    let orientation = s.orientation * quat_from_rotvec(&(omega * dt));
    let orientation = UnitQuaternion::new_normalize(orientation.into_inner());
    NavState {
        position: s.position + s.velocity * dt + a_nav * (0.5 * dt * dt),
        velocity: s.velocity + a_nav * dt,
        orientation,
        gyro_bias: s.gyro_bias,
        accel_bias: s.accel_bias,
    }
}

/// Discrete process noise over `dt` for the 15-dim error state.
pub fn process_noise_cov(p: &ImuNoiseParams, dt: f64) -> DMatrix<f64> {
    let dt2 = dt * dt;
    let acc_var = p.accel_std * p.accel_std;
    let blocks = [
        (POS, 0.25 * acc_var * dt2 * dt2),
        (VEL, acc_var * dt2),
        (ATT, p.gyro_std * p.gyro_std * dt2),
        (GYRO_BIAS, p.gyro_bias_rw * p.gyro_bias_rw * dt2),
        (ACCEL_BIAS, p.accel_bias_rw * p.accel_bias_rw * dt2),
    ];
    let mut q = DMatrix::zeros(ERROR_DIM, ERROR_DIM);
    for (start, var) in blocks {
        for i in start..start + 3 {
            q[(i, i)] = var;
        }
    }
    q
}

fn block(d: &DVector<f64>, start: usize) -> Vector3<f64> {
    Vector3::new(d[start], d[start + 1], d[start + 2])
}

const MEAN_ITERATIONS: usize = 20;
const MEAN_TOLERANCE: f64 = 1e-9;

/// Weighted quaternion mean by iterated rotation-vector averaging, starting at
/// the point with the largest weight.
pub fn weighted_orientation_mean(
    qs: &[UnitQuaternion<f64>],
    weights: &[f64],
) -> UnitQuaternion<f64> {
    let total: f64 = weights.iter().sum();
    let start = weights
        .iter()
        .enumerate()
        .fold(0, |best, (i, w)| if *w > weights[best] { i } else { best });
    let mut mean = qs[start];
    for _ in 0..MEAN_ITERATIONS {
        let mut step = Vector3::zeros();
        for (q, w) in qs.iter().zip(weights) {
            step += rotvec_from_quat(&(mean.inverse() * q)) * *w;
        }
        step /= total;
        mean = UnitQuaternion::new_normalize((mean * quat_from_rotvec(&step)).into_inner());
        if step.norm() < MEAN_TOLERANCE {
            break;
        }
    }
    mean
}

impl SigmaState for NavState {
    fn dim(&self) -> usize {
        ERROR_DIM
    }

    fn retract(&self, d: &DVector<f64>) -> Self {
        Self {
            position: self.position + block(d, POS),
            velocity: self.velocity + block(d, VEL),
            orientation: self.orientation * quat_from_rotvec(&block(d, ATT)),
            gyro_bias: self.gyro_bias + block(d, GYRO_BIAS),
            accel_bias: self.accel_bias + block(d, ACCEL_BIAS),
        }
    }

    fn local(&self, other: &Self) -> DVector<f64> {
        let mut d = DVector::zeros(ERROR_DIM);
        let parts = [
            (POS, other.position - self.position),
            (VEL, other.velocity - self.velocity),
            (ATT, rotvec_from_quat(&(self.orientation.inverse() * other.orientation))),
            (GYRO_BIAS, other.gyro_bias - self.gyro_bias),
            (ACCEL_BIAS, other.accel_bias - self.accel_bias),
        ];
        for (start, v) in parts {
            d.fixed_rows_mut::<3>(start).copy_from(&v);
        }
        d
    }

    fn weighted_mean(points: &[Self], weights: &[f64]) -> Self {
        let mut mean = NavState {
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
            gyro_bias: Vector3::zeros(),
            accel_bias: Vector3::zeros(),
        };
        for (p, w) in points.iter().zip(weights) {
            mean.position += p.position * *w;
            mean.velocity += p.velocity * *w;
            mean.gyro_bias += p.gyro_bias * *w;
            mean.accel_bias += p.accel_bias * *w;
        }
        let qs: Vec<_> = points.iter().map(|p| p.orientation).collect();
        mean.orientation = weighted_orientation_mean(&qs, weights);
        mean
    }
}

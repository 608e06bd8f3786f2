//! Deterministic ground truth and corrupted sensor streams.
//!
//! Randomness comes from PCG32 (`rand_pcg::Pcg32`, XSH-RR 64/32, 64-bit state)
//! with the run seed as state. IMU and GNSS noise use separate PCG streams so
//! dropping fixes never shifts the IMU noise sequence. Normal deviates are
//! drawn with `rand_distr::StandardNormal`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use rand_pcg::Pcg32;
use thiserror::Error;

use crate::geodesy::{enu_to_geodetic, GeodesyError, GeodeticCoord, LocalEnu};
use crate::gnss::{GnssFix, GnssNoise};
use crate::strapdown::{gravity_enu, rotvec_from_quat, ImuNoiseParams, ImuSample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("unknown profile kind '{0}' (expected stationary, straight, circular or figure-eight)")]
    UnknownProfileKind(String),
    #[error("invalid trajectory profile: {0}")]
    InvalidProfile(String),
    #[error("invalid sensor corruption: {0}")]
    InvalidCorruption(String),
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
}

pub const IMU_STREAM: u64 = 1;
pub const GNSS_STREAM: u64 = 2;

/// Fixed scenario origin (49.0 N, 8.43 E, 115 m).
pub fn scenario_origin() -> GeodeticCoord {
    GeodeticCoord {
        lat: 49.0f64.to_radians(),
        lon: 8.43f64.to_radians(),
        height: 115.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Stationary,
    /// Starts at rest heading east and accelerates along the heading.
    StraightConstantAccel,
    /// Counter-clockwise circle starting at the origin heading east.
    Circular,
    /// Lissajous figure eight through the origin.
    FigureEight,
}

impl FromStr for ProfileKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stationary" => Ok(Self::Stationary),
            "straight" | "straight-constant-accel" => Ok(Self::StraightConstantAccel),
            "circular" => Ok(Self::Circular),
            "figure-eight" | "figure8" => Ok(Self::FigureEight),
            other => Err(SimError::UnknownProfileKind(other.to_string())),
        }
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Stationary => "stationary",
            Self::StraightConstantAccel => "straight",
            Self::Circular => "circular",
            Self::FigureEight => "figure-eight",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryProfile {
    pub kind: ProfileKind,
    /// seconds
    pub duration: f64,
    /// Hz
    pub imu_rate: f64,
    /// Hz
    pub gnss_rate: f64,
    /// m/s, circular and figure-eight
    pub speed: f64,
    /// m, circle radius or figure-eight half width
    pub radius: f64,
    /// m/s^2, straight profile
    pub accel: f64,
}

impl TrajectoryProfile {
    pub fn new(kind: ProfileKind, duration: f64) -> Self {
        Self {
            kind,
            duration,
            imu_rate: 100.0,
            gnss_rate: 1.0,
            speed: 5.0,
            radius: 20.0,
            accel: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidProfile(m.to_string()));
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad("duration must be positive");
        }
        if !(self.imu_rate > 0.0) || !(self.gnss_rate > 0.0) {
            return bad("rates must be positive");
        }
        if self.imu_rate < self.gnss_rate {
            return bad("imu rate must not be below gnss rate");
        }
        match self.kind {
            ProfileKind::Circular | ProfileKind::FigureEight
                if !(self.speed > 0.0) || !(self.radius > 0.0) =>
            {
                bad("speed and radius must be positive")
            }
            ProfileKind::StraightConstantAccel if !self.accel.is_finite() => {
                bad("acceleration must be finite")
            }
            _ => Ok(()),
        }
    }

    pub fn sample_count(&self) -> usize {
        (self.duration * self.imu_rate).round() as usize + 1
    }
}

/// True kinematic state at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthPose {
    pub t: f64,
    pub position: LocalEnu,
    pub velocity: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

struct Kinematics {
    pos: Vector3<f64>,
    vel: Vector3<f64>,
    yaw: f64,
}

fn kinematics(p: &TrajectoryProfile, t: f64) -> Kinematics {
    match p.kind {
        ProfileKind::Stationary => Kinematics {
            pos: Vector3::zeros(),
            vel: Vector3::zeros(),
            yaw: 0.0,
        },
        ProfileKind::StraightConstantAccel => Kinematics {
            pos: Vector3::new(0.5 * p.accel * t * t, 0.0, 0.0),
            vel: Vector3::new(p.accel * t, 0.0, 0.0),
            yaw: 0.0,
        },
        ProfileKind::Circular => {
            let (r, v) = (p.radius, p.speed);
            let w = v / r;
            let (s, c) = (w * t).sin_cos();
            Kinematics {
                pos: Vector3::new(r * s, r * (1.0 - c), 0.0),
                vel: Vector3::new(v * c, v * s, 0.0),
                yaw: w * t,
            }
        }
        ProfileKind::FigureEight => {
            let a = p.radius;
            let w = p.speed / a;
            let (s1, c1) = (w * t).sin_cos();
            let (s2, c2) = (2.0 * w * t).sin_cos();
            let vel = Vector3::new(a * w * c1, a * w * c2, 0.0);
            Kinematics {
                pos: Vector3::new(a * s1, 0.5 * a * s2, 0.0),
                vel,
                yaw: vel.y.atan2(vel.x),
            }
        }
    }
}

fn yaw_quat(yaw: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw)
}

/// Truth sampled at the IMU rate and the matching noise-free IMU stream.
///
/// Sample `k` carries the interval-average rate and specific force over
/// `[t_k, t_k + 1/imu_rate]`, expressed in the body frame at `t_k` (the
/// increment form an integrating IMU reports). One strapdown step per sample
/// then reproduces the truth velocity and attitude at every sample time.
pub fn generate_truth(p: &TrajectoryProfile) -> Result<(Vec<TruthPose>, Vec<ImuSample>), SimError> {
    p.validate()?;
    let n = p.sample_count();
    let dt = 1.0 / p.imu_rate;
    let mut truth = Vec::with_capacity(n);
    let mut imu = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / p.imu_rate;
        let now = kinematics(p, t);
        let next = kinematics(p, t + dt);
        let q = yaw_quat(now.yaw);
        let q_next = yaw_quat(next.yaw);
        let gyro = rotvec_from_quat(&(q.inverse() * q_next)) / dt;
        let specific_force = q.inverse() * ((next.vel - now.vel) / dt - gravity_enu());
        truth.push(TruthPose {
            t,
            position: LocalEnu::from_vector(&now.pos),
            velocity: now.vel,
            orientation: q,
        });
        imu.push(ImuSample::new(t, gyro, specific_force));
    }
    Ok((truth, imu))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorCorruption {
    pub imu_noise: ImuNoiseParams,
    /// Simulated GNSS noise. Zero sigmas are allowed and mean exact fixes.
    pub gnss_noise: GnssNoise,
    /// Half-open `[start, end)` windows, seconds, in which fixes are dropped.
    pub outages: Vec<(f64, f64)>,
    pub seed: u64,
    pub gnss_rate: f64,
}

impl SensorCorruption {
    pub fn new(seed: u64) -> Self {
        Self {
            imu_noise: ImuNoiseParams::default(),
            gnss_noise: GnssNoise::default(),
            outages: Vec::new(),
            seed,
            gnss_rate: 1.0,
        }
    }

    pub fn noiseless(seed: u64) -> Self {
        Self {
            imu_noise: ImuNoiseParams::zero(),
            gnss_noise: GnssNoise::uniform(0.0),
            ..Self::new(seed)
        }
    }

    pub fn in_outage(&self, t: f64) -> bool {
        self.outages.iter().any(|&(s, e)| t >= s && t < e)
    }

    fn validate(&self, duration: f64) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidCorruption(m));
        if !self.imu_noise.is_valid() {
            return bad("IMU noise must be non-negative".into());
        }
        let g = self.gnss_noise.as_vector();
        if !g.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return bad("GNSS noise must be non-negative".into());
        }
        if !(self.gnss_rate > 0.0) {
            return bad("GNSS rate must be positive".into());
        }
        for &(s, e) in &self.outages {
            if !(s >= 0.0 && e >= s && e <= duration) {
                return bad(format!("outage [{s}, {e}] outside [0, {duration}]"));
            }
        }
        Ok(())
    }
}

fn normal3(rng: &mut Pcg32) -> Vector3<f64> {
    Vector3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// Adds bias random walk and white noise to the IMU and samples noisy GNSS
/// fixes from the truth about [`scenario_origin`].
pub fn corrupt(
    truth: &[TruthPose],
    ideal: &[ImuSample],
    c: &SensorCorruption,
) -> Result<(Vec<ImuSample>, Vec<GnssFix>), SimError> {
    let duration = truth.last().map_or(0.0, |p| p.t);
    c.validate(duration)?;
    let n = &c.imu_noise;

    let mut rng = Pcg32::new(c.seed, IMU_STREAM);
    let mut gyro_bias = Vector3::zeros();
    let mut accel_bias = Vector3::zeros();
    let mut imu = Vec::with_capacity(ideal.len());
    for (k, u) in ideal.iter().enumerate() {
        let gyro_noise = normal3(&mut rng) * n.gyro_std;
        let accel_noise = normal3(&mut rng) * n.accel_std;
        imu.push(ImuSample::new(
            u.t,
            u.gyro + gyro_bias + gyro_noise,
            u.accel + accel_bias + accel_noise,
        ));
        let dt = ideal.get(k + 1).map_or(0.0, |next| next.t - u.t);
        let sq = dt.sqrt();
        gyro_bias += normal3(&mut rng) * (n.gyro_bias_rw * sq);
        accel_bias += normal3(&mut rng) * (n.accel_bias_rw * sq);
    }

    let origin = scenario_origin();
    let sigma = c.gnss_noise.as_vector();
    let mut rng = Pcg32::new(c.seed, GNSS_STREAM);
    let mut gnss = Vec::new();
    let mut next_time = 0.0;
    let mut j = 0u64;
    for pose in truth {
        // One candidate fix per GNSS period, at the first truth sample at or
        // after the nominal fix time.
        if pose.t + 1e-9 < next_time {
            continue;
        }
        j += 1;
        next_time = j as f64 / c.gnss_rate;
        let noise = normal3(&mut rng).component_mul(&sigma);
        if c.in_outage(pose.t) {
            continue;
        }
        let local = LocalEnu::from_vector(&(pose.position.to_vector() + noise));
        let g = enu_to_geodetic(&local, &origin)?;
        gnss.push(GnssFix::new(pose.t, g.lat, g.lon, g.height));
    }
    Ok((imu, gnss))
}

/// Closed-loop period of the circular profile.
pub fn circle_period(p: &TrajectoryProfile) -> f64 {
    2.0 * PI * p.radius / p.speed
}

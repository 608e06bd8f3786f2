//! Time-ordered GNSS/IMU fusion: IMU-rate prediction, GNSS-rate correction.

use nalgebra::{DMatrix, DVector, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::geodesy::{GeodeticCoord, LocalEnu};
use crate::gnss::{fix_to_local, measurement_cov, measurement_fn, GnssError, GnssFix, GnssNoise};
use crate::strapdown::{
    process_noise_cov, propagate, ImuNoiseParams, ImuSample, NavState, ERROR_DIM,
};
use crate::ukf::{
    unscented_predict, unscented_update, GaussianBelief, SigmaParams, UkfError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("IMU stream is empty")]
    EmptyImuStream,
    #[error("GNSS stream is empty")]
    EmptyStream,
    #[error("{stream} timestamps are not monotonic at index {index} (t = {t})")]
    NonMonotonicTime {
        stream: &'static str,
        index: usize,
        t: f64,
    },
    #[error("invalid fusion config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Filter(#[from] UkfError),
    #[error(transparent)]
    Gnss(#[from] GnssError),
}

/// Prior standard deviations for the initial error state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialStd {
    pub position: f64,
    pub velocity: f64,
    pub attitude: f64,
    pub gyro_bias: f64,
    pub accel_bias: f64,
}

impl Default for InitialStd {
    fn default() -> Self {
        Self {
            position: 10.0,
            velocity: 1.0,
            attitude: 0.1,
            gyro_bias: 0.01,
            accel_bias: 0.1,
        }
    }
}

impl InitialStd {
    pub fn covariance(&self) -> DMatrix<f64> {
        let stds = [
            self.position,
            self.velocity,
            self.attitude,
            self.gyro_bias,
            self.accel_bias,
        ];
        DMatrix::from_fn(ERROR_DIM, ERROR_DIM, |i, j| {
            if i == j {
                stds[i / 3] * stds[i / 3]
            } else {
                0.0
            }
        })
    }
}

/// Chi-square 99.9% quantile for 3 degrees of freedom.
pub const DEFAULT_GATE: f64 = 16.27;

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub imu_noise: ImuNoiseParams,
    pub gnss_noise: GnssNoise,
    /// Initial velocity in the local frame, m/s.
    pub initial_velocity: Vector3<f64>,
    pub initial_orientation: UnitQuaternion<f64>,
    pub initial_std: InitialStd,
    /// Reject fixes whose NIS exceeds this value. `None` accepts every fix.
    pub gnss_gate: Option<f64>,
    /// Estimates whose covariance trace exceeds this are flagged as diverged.
    pub divergence_trace: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            gamma: 1.0,
            imu_noise: ImuNoiseParams::default(),
            gnss_noise: GnssNoise::default(),
            initial_velocity: Vector3::zeros(),
            initial_orientation: UnitQuaternion::identity(),
            initial_std: InitialStd::default(),
            gnss_gate: None,
            divergence_trace: 1e8,
        }
    }
}

impl FusionConfig {
    pub fn sigma_params(&self) -> SigmaParams {
        SigmaParams::new(self.alpha, self.beta, self.gamma, ERROR_DIM)
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        let s = &self.initial_std;
        let stds = [s.position, s.velocity, s.attitude, s.gyro_bias, s.accel_bias];
        if !stds.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(FusionError::InvalidConfig(
                "initial standard deviations must be positive".into(),
            ));
        }
        if !self.imu_noise.is_valid() {
            return Err(FusionError::InvalidConfig(
                "IMU noise parameters must be non-negative".into(),
            ));
        }
        measurement_cov(&self.gnss_noise)?;
        if let Some(g) = self.gnss_gate {
            if !(g > 0.0) {
                return Err(FusionError::InvalidConfig(format!("gnss gate {g} must be positive")));
            }
        }
        if !(self.divergence_trace > 0.0) {
            return Err(FusionError::InvalidConfig(
                "divergence trace ceiling must be positive".into(),
            ));
        }
        crate::ukf::compute_weights(&self.sigma_params())?;
        Ok(())
    }

    pub fn initial_belief(&self) -> GaussianBelief<NavState> {
        GaussianBelief {
            mean: NavState {
                velocity: self.initial_velocity,
                orientation: self.initial_orientation,
                ..NavState::default()
            },
            cov: self.initial_std.covariance(),
        }
    }
}

/// What happened to a GNSS fix applied at an estimate's timestamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnssUpdate {
    pub fix_t: f64,
    pub measurement: LocalEnu,
    pub innovation: Vector3<f64>,
    pub nis: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseEstimate {
    pub t: f64,
    pub position: LocalEnu,
    pub velocity: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    /// Marginal variances of the 15-dim error state.
    pub cov_diag: [f64; ERROR_DIM],
    /// Set when the covariance trace exceeds the configured ceiling.
    pub diverged: bool,
    /// Last fix applied at this timestamp, if any.
    pub update: Option<GnssUpdate>,
}

impl PoseEstimate {
    pub fn cov_trace(&self) -> f64 {
        self.cov_diag.iter().sum()
    }
}

/// Filter progress reported to an observer during [`run_fusion_with`].
#[derive(Debug)]
pub enum FilterEvent<'a> {
    Predicted {
        t: f64,
        belief: &'a GaussianBelief<NavState>,
    },
    Updated {
        t: f64,
        prior: &'a GaussianBelief<NavState>,
        posterior: &'a GaussianBelief<NavState>,
        update: &'a GnssUpdate,
    },
}

/// UKF over the strapdown state with GNSS position updates.
#[derive(Debug, Clone)]
pub struct NavFilter {
    belief: GaussianBelief<NavState>,
    params: SigmaParams,
    imu_noise: ImuNoiseParams,
    gate: Option<f64>,
}

impl NavFilter {
    pub fn new(cfg: &FusionConfig) -> Result<Self, FusionError> {
        cfg.validate()?;
        Ok(Self {
            belief: cfg.initial_belief(),
            params: cfg.sigma_params(),
            imu_noise: cfg.imu_noise,
            gate: cfg.gnss_gate,
        })
    }

    pub fn belief(&self) -> &GaussianBelief<NavState> {
        &self.belief
    }

    pub fn predict(&mut self, u: &ImuSample, dt: f64) -> Result<(), FusionError> {
        let q = process_noise_cov(&self.imu_noise, dt);
        self.belief = unscented_predict(&self.belief, |s| propagate(s, u, dt), &q, &self.params)?;
        Ok(())
    }

    /// Applies a local-frame position observation. A gated fix leaves the
    /// belief untouched and is reported with `accepted == false`.
    pub fn update(
        &mut self,
        fix_t: f64,
        measurement: LocalEnu,
        noise: &GnssNoise,
    ) -> Result<GnssUpdate, FusionError> {
        let r = measurement_cov(noise)?;
        let y = DVector::from_column_slice(measurement.to_vector().as_slice());
        let out = unscented_update(&self.belief, measurement_fn, &r, &y, &self.params)?;
        let accepted = self.gate.is_none_or(|g| out.nis <= g);
        if accepted {
            self.belief = out.posterior;
        }
        Ok(GnssUpdate {
            fix_t,
            measurement,
            innovation: Vector3::new(out.innovation[0], out.innovation[1], out.innovation[2]),
            nis: out.nis,
            accepted,
        })
    }

    fn estimate(&self, t: f64, ceiling: f64, update: Option<GnssUpdate>) -> PoseEstimate {
        let mut cov_diag = [0.0; ERROR_DIM];
        for (i, v) in cov_diag.iter_mut().enumerate() {
            *v = self.belief.cov[(i, i)];
        }
        let trace: f64 = cov_diag.iter().sum();
        let s = &self.belief.mean;
        PoseEstimate {
            t,
            position: s.local_position(),
            velocity: s.velocity,
            orientation: s.orientation,
            cov_diag,
            diverged: !(trace <= ceiling) || !s.is_finite(),
            update,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutput {
    /// First valid GNSS fix; the local frame of every estimate. `None` when
    /// the run had no usable fixes.
    pub origin: Option<GeodeticCoord>,
    pub estimates: Vec<PoseEstimate>,
}

fn check_streams(imu: &[ImuSample], gnss: &[GnssFix]) -> Result<(), FusionError> {
    if imu.is_empty() {
        return Err(FusionError::EmptyImuStream);
    }
    for (i, w) in imu.windows(2).enumerate() {
        if !(w[1].t > w[0].t) {
            return Err(FusionError::NonMonotonicTime {
                stream: "IMU",
                index: i + 1,
                t: w[1].t,
            });
        }
    }
    if let Some(i) = imu.iter().position(|u| !u.t.is_finite()) {
        return Err(FusionError::NonMonotonicTime {
            stream: "IMU",
            index: i,
            t: imu[i].t,
        });
    }
    for (i, w) in gnss.windows(2).enumerate() {
        if !(w[1].t >= w[0].t) {
            return Err(FusionError::NonMonotonicTime {
                stream: "GNSS",
                index: i + 1,
                t: w[1].t,
            });
        }
    }
    Ok(())
}

pub fn run_fusion(
    imu: &[ImuSample],
    gnss: &[GnssFix],
    cfg: &FusionConfig,
) -> Result<FusionOutput, FusionError> {
    run_fusion_with(imu, gnss, cfg, |_| {})
}

/// Runs the filter over both streams, emitting one estimate per IMU sample.
///
/// Sample `k` drives the prediction from `t[k]` to `t[k+1]`. A fix is applied
/// right after the prediction that lands on the last IMU timestamp not later
/// than the fix. Fixes before the first or after the last IMU sample are
/// skipped, as are fixes with invalid coordinates.
pub fn run_fusion_with<F>(
    imu: &[ImuSample],
    gnss: &[GnssFix],
    cfg: &FusionConfig,
    mut observer: F,
) -> Result<FusionOutput, FusionError>
where
    F: FnMut(FilterEvent<'_>),
{
    check_streams(imu, gnss)?;
    let mut filter = NavFilter::new(cfg)?;

    let valid: Vec<&GnssFix> = gnss.iter().filter(|f| f.is_valid()).collect();
    let origin = valid.first().map(|f| f.geodetic());
    let mut next_fix = valid.partition_point(|f| f.t < imu[0].t);

    let mut estimates = Vec::with_capacity(imu.len());
    for k in 0..imu.len() {
        let t = imu[k].t;
        if k > 0 {
            filter.predict(&imu[k - 1], t - imu[k - 1].t)?;
            observer(FilterEvent::Predicted {
                t,
                belief: filter.belief(),
            });
        }

        let window_end = imu.get(k + 1).map_or(t, |u| u.t);
        let mut applied = None;
        while let Some(fix) = valid.get(next_fix) {
            let in_window = if k + 1 < imu.len() {
                fix.t < window_end
            } else {
                fix.t <= t
            };
            if !in_window {
                break;
            }
            next_fix += 1;
            // origin is Some whenever there is a valid fix
            let o = origin.as_ref().expect("origin from first valid fix");
            let noise = fix
                .std
                .map(|s| GnssNoise::new(s.x, s.y, s.z))
                .unwrap_or(cfg.gnss_noise);
            let prior = filter.belief().clone();
            let upd = filter.update(fix.t, fix_to_local(fix, o), &noise)?;
            observer(FilterEvent::Updated {
                t,
                prior: &prior,
                posterior: filter.belief(),
                update: &upd,
            });
            applied = Some(upd);
        }
        estimates.push(filter.estimate(t, cfg.divergence_trace, applied));
    }
    Ok(FusionOutput { origin, estimates })
}

/// Baseline that reports each fix in the local frame with no filtering.
pub fn run_gnss_only(
    gnss: &[GnssFix],
    origin: &GeodeticCoord,
) -> Result<Vec<PoseEstimate>, FusionError> {
    if gnss.is_empty() {
        return Err(FusionError::EmptyStream);
    }
    Ok(gnss
        .iter()
        .map(|f| PoseEstimate {
            t: f.t,
            position: fix_to_local(f, origin),
            velocity: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
            cov_diag: [0.0; ERROR_DIM],
            diverged: false,
            update: None,
        })
        .collect())
}

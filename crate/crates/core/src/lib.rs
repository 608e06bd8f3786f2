//! GNSS/IMU position estimation with an unscented Kalman filter.
//!
//! The crate is organized bottom-up:
//!
//! - [`geodesy`]: WGS84 geodetic, ECEF and local ENU transforms.
//! - [`ukf`]: sigma points, weights, time and measurement updates.
//! - [`strapdown`]: the inertial process model and its 15-dim error state.
//! - [`gnss`]: GNSS fixes as local-frame position observations.
//! - [`fusion`]: the IMU-rate predict / GNSS-rate update pipeline.
//! - [`kitti`]: KITTI raw OXTS ingestion.
//! - [`simulator`]: deterministic truth and noisy sensor streams.
//! - [`evaluation`]: error series, RMSE and CSV exports.
//! - [`io`]: CSV schemas for streams, truth and estimates.

// `!(x > 0.0)` is used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod evaluation;
pub mod fusion;
pub mod geodesy;
pub mod gnss;
pub mod io;
pub mod kitti;
pub mod simulator;
pub mod strapdown;
pub mod ukf;

pub use fusion::{run_fusion, run_gnss_only, FusionConfig, FusionOutput, PoseEstimate};
pub use geodesy::{EcefCoord, GeodeticCoord, LocalEnu};
pub use gnss::{GnssFix, GnssNoise};
pub use strapdown::{ImuNoiseParams, ImuSample, NavState};
pub use ukf::{GaussianBelief, SigmaParams};

//! Position error series, per-axis RMSE and plot-ready CSV exports.

use std::path::Path;

use thiserror::Error;

use crate::fusion::PoseEstimate;
use crate::geodesy::LocalEnu;
use crate::io::{fmt_num, write_rows, DataError};
use crate::simulator::TruthPose;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("estimate at t = {t} lies outside the truth span [{start}, {end}]")]
    TimeSpanMismatch { t: f64, start: f64, end: f64 },
    #[error("error series is empty")]
    EmptySeries,
    #[error(transparent)]
    Io(#[from] DataError),
}

pub const ERRORS_HEADER: &str = "t,ex,ey,ez";
pub const TRACK_HEADER: &str = "t,est_e,est_n,est_u,truth_e,truth_n,truth_u,gnss_e,gnss_n,gnss_u";
pub const RMSE_HEADER: &str = "method,rmse_x,rmse_y,rmse_z";

/// Estimate minus truth, per local axis.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorSeries {
    pub t: Vec<f64>,
    pub ex: Vec<f64>,
    pub ey: Vec<f64>,
    pub ez: Vec<f64>,
}

impl ErrorSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn push(&mut self, t: f64, e: LocalEnu) {
        self.t.push(t);
        self.ex.push(e.east);
        self.ey.push(e.north);
        self.ez.push(e.up);
    }

    pub fn norm_at(&self, i: usize) -> f64 {
        (self.ex[i].powi(2) + self.ey[i].powi(2) + self.ez[i].powi(2)).sqrt()
    }

    /// Rows with `start <= t < end`.
    pub fn window(&self, start: f64, end: f64) -> ErrorSeries {
        let mut out = ErrorSeries::default();
        for i in 0..self.len() {
            if self.t[i] >= start && self.t[i] < end {
                out.push(self.t[i], LocalEnu::new(self.ex[i], self.ey[i], self.ez[i]));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rmse {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Rmse {
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseRow {
    pub method: String,
    pub rmse: Rmse,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RmseReport {
    pub rows: Vec<RmseRow>,
}

impl RmseReport {
    pub fn push(&mut self, method: impl Into<String>, rmse: Rmse) {
        self.rows.push(RmseRow {
            method: method.into(),
            rmse,
        });
    }

    pub fn get(&self, method: &str) -> Option<&Rmse> {
        self.rows.iter().find(|r| r.method == method).map(|r| &r.rmse)
    }
}

const SPAN_TOLERANCE: f64 = 1e-9;

/// Truth position linearly interpolated at `t`.
pub fn interpolate_truth(truth: &[TruthPose], t: f64) -> Result<LocalEnu, EvalError> {
    let span = |t| EvalError::TimeSpanMismatch {
        t,
        start: truth.first().map_or(f64::NAN, |p| p.t),
        end: truth.last().map_or(f64::NAN, |p| p.t),
    };
    let (first, last) = match (truth.first(), truth.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(span(t)),
    };
    if !(t >= first.t - SPAN_TOLERANCE && t <= last.t + SPAN_TOLERANCE) {
        return Err(span(t));
    }
    let i = truth.partition_point(|p| p.t <= t);
    if i == 0 {
        return Ok(first.position);
    }
    if i == truth.len() {
        return Ok(last.position);
    }
    let (a, b) = (&truth[i - 1], &truth[i]);
    if a.t == t {
        return Ok(a.position);
    }
    let w = (t - a.t) / (b.t - a.t);
    let pa = a.position.to_vector();
    let pb = b.position.to_vector();
    Ok(LocalEnu::from_vector(&(pa + (pb - pa) * w)))
}

pub fn align_and_diff(est: &[PoseEstimate], truth: &[TruthPose]) -> Result<ErrorSeries, EvalError> {
    if est.is_empty() {
        return Err(EvalError::EmptySeries);
    }
    let mut out = ErrorSeries::default();
    for e in est {
        let reference = interpolate_truth(truth, e.t)?;
        out.push(
            e.t,
            LocalEnu::from_vector(&(e.position.to_vector() - reference.to_vector())),
        );
    }
    Ok(out)
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

pub fn rmse(e: &ErrorSeries) -> Result<Rmse, EvalError> {
    if e.is_empty() {
        return Err(EvalError::EmptySeries);
    }
    Ok(Rmse {
        x: rms(&e.ex),
        y: rms(&e.ey),
        z: rms(&e.ez),
    })
}

/// One row of the XY-track export.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRow {
    pub t: f64,
    pub estimate: LocalEnu,
    pub truth: LocalEnu,
    pub gnss: Option<LocalEnu>,
}

/// Estimate, interpolated truth and the GNSS measurement applied at each
/// estimate timestamp.
pub fn build_track(est: &[PoseEstimate], truth: &[TruthPose]) -> Result<Vec<TrackRow>, EvalError> {
    est.iter()
        .map(|e| {
            Ok(TrackRow {
                t: e.t,
                estimate: e.position,
                truth: interpolate_truth(truth, e.t)?,
                gnss: e.update.map(|u| u.measurement),
            })
        })
        .collect()
}

pub fn export_errors_csv(series: &ErrorSeries, path: &Path) -> Result<(), EvalError> {
    let rows = (0..series.len()).map(|i| {
        [series.t[i], series.ex[i], series.ey[i], series.ez[i]]
            .iter()
            .map(|v| fmt_num(*v))
            .collect()
    });
    Ok(write_rows(path, ERRORS_HEADER, rows)?)
}

pub fn export_track_csv(track: &[TrackRow], path: &Path) -> Result<(), EvalError> {
    let rows = track.iter().map(|r| {
        let mut row: Vec<String> = [
            r.t,
            r.estimate.east,
            r.estimate.north,
            r.estimate.up,
            r.truth.east,
            r.truth.north,
            r.truth.up,
        ]
        .iter()
        .map(|v| fmt_num(*v))
        .collect();
        match r.gnss {
            Some(g) => row.extend([g.east, g.north, g.up].iter().map(|v| fmt_num(*v))),
            None => row.extend(std::iter::repeat_n(String::new(), 3)),
        }
        row
    });
    Ok(write_rows(path, TRACK_HEADER, rows)?)
}

pub fn export_rmse_csv(report: &RmseReport, path: &Path) -> Result<(), EvalError> {
    let rows = report.rows.iter().map(|r| {
        vec![
            r.method.clone(),
            fmt_num(r.rmse.x),
            fmt_num(r.rmse.y),
            fmt_num(r.rmse.z),
        ]
    });
    Ok(write_rows(path, RMSE_HEADER, rows)?)
}

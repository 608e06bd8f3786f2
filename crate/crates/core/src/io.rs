//! CSV schemas for sensor streams, truth and estimates.
//!
//! Numbers are written with 17 significant digits in `{:.16e}` form, which is
//! locale independent and round-trips every `f64` exactly.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::fusion::PoseEstimate;
use crate::geodesy::{enu_to_geodetic, geodetic_to_enu, GeodesyError, GeodeticCoord, LocalEnu};
use crate::gnss::GnssFix;
use crate::simulator::TruthPose;
use crate::strapdown::ImuSample;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: expected header '{expected}', found '{found}'")]
    Header {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
}

pub const IMU_HEADER: &str = "t,wx,wy,wz,ax,ay,az";
pub const GNSS_HEADER: &str = "t,lat_deg,lon_deg,alt_m";
pub const TRUTH_HEADER: &str = "t,e,n,u,lat_deg,lon_deg,alt_m,ve,vn,vu,qw,qx,qy,qz";
pub const ESTIMATE_HEADER: &str = "t,e,n,u,ve,vn,vu,qw,qx,qy,qz,\
var_pe,var_pn,var_pu,var_ve,var_vn,var_vu,var_rx,var_ry,var_rz,\
var_bgx,var_bgy,var_bgz,var_bax,var_bay,var_baz,cov_trace,nis,accepted,diverged";

/// Formats a number with 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a temporary file in the target directory, then renames it
/// over `path`.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<(), DataError>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))?;
    }
    tmp.persist(path).map_err(|e| DataError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// Writes a header and rows of pre-formatted fields.
pub fn write_rows<I>(path: &Path, header: &str, rows: I) -> Result<(), DataError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    write_atomic(path, |w| {
        writeln!(w, "{header}")?;
        for row in rows {
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })
}

/// Reads a CSV with an exact header; each record is returned as raw fields
/// with its 1-based line number.
pub fn read_rows(path: &Path, header: &str) -> Result<Vec<(u64, Vec<String>)>, DataError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let found = reader
        .headers()
        .map_err(|e| DataError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if found != header {
        return Err(DataError::Header {
            path: path.to_path_buf(),
            expected: header.to_string(),
            found,
        });
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| DataError::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

fn parse_fields(path: &Path, line: u64, fields: &[String]) -> Result<Vec<f64>, DataError> {
    fields
        .iter()
        .map(|f| {
            f.trim().parse::<f64>().map_err(|_| DataError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("'{f}' is not a number"),
            })
        })
        .collect()
}

pub fn write_imu_csv(path: &Path, imu: &[ImuSample]) -> Result<(), DataError> {
    write_rows(
        path,
        IMU_HEADER,
        imu.iter().map(|u| {
            [u.t, u.gyro.x, u.gyro.y, u.gyro.z, u.accel.x, u.accel.y, u.accel.z]
                .iter()
                .map(|v| fmt_num(*v))
                .collect()
        }),
    )
}

pub fn read_imu_csv(path: &Path) -> Result<Vec<ImuSample>, DataError> {
    read_rows(path, IMU_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            let v = parse_fields(path, line, &f)?;
            Ok(ImuSample::new(
                v[0],
                Vector3::new(v[1], v[2], v[3]),
                Vector3::new(v[4], v[5], v[6]),
            ))
        })
        .collect()
}

pub fn write_gnss_csv(path: &Path, gnss: &[GnssFix]) -> Result<(), DataError> {
    write_rows(
        path,
        GNSS_HEADER,
        gnss.iter().map(|f| {
            [f.t, f.lat.to_degrees(), f.lon.to_degrees(), f.alt]
                .iter()
                .map(|v| fmt_num(*v))
                .collect()
        }),
    )
}

pub fn read_gnss_csv(path: &Path) -> Result<Vec<GnssFix>, DataError> {
    read_rows(path, GNSS_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            let v = parse_fields(path, line, &f)?;
            let fix = GnssFix::from_degrees(v[0], v[1], v[2], v[3]);
            if !fix.is_valid() {
                return Err(DataError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("fix ({}, {}, {}) out of geodetic bounds", v[1], v[2], v[3]),
                });
            }
            Ok(fix)
        })
        .collect()
}

/// A truth row as stored on disk. Positions are kept geodetically so they can
/// be expressed in any local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRecord {
    pub t: f64,
    pub geodetic: GeodeticCoord,
    pub velocity: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl TruthRecord {
    /// The pose with its position expressed in the ENU frame at `origin`.
    pub fn in_frame(&self, origin: &GeodeticCoord) -> TruthPose {
        TruthPose {
            t: self.t,
            position: geodetic_to_enu(&self.geodetic, origin),
            velocity: self.velocity,
            orientation: self.orientation,
        }
    }
}

pub fn write_truth_csv(
    path: &Path,
    truth: &[TruthPose],
    origin: &GeodeticCoord,
) -> Result<(), DataError> {
    let mut rows = Vec::with_capacity(truth.len());
    for p in truth {
        let g = enu_to_geodetic(&p.position, origin)?;
        let q = p.orientation;
        rows.push(
            [
                p.t,
                p.position.east,
                p.position.north,
                p.position.up,
                g.lat.to_degrees(),
                g.lon.to_degrees(),
                g.height,
                p.velocity.x,
                p.velocity.y,
                p.velocity.z,
                q.w,
                q.i,
                q.j,
                q.k,
            ]
            .iter()
            .map(|v| fmt_num(*v))
            .collect(),
        );
    }
    write_rows(path, TRUTH_HEADER, rows)
}

pub fn read_truth_csv(path: &Path) -> Result<Vec<TruthRecord>, DataError> {
    read_rows(path, TRUTH_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            let v = parse_fields(path, line, &f)?;
            Ok(TruthRecord {
                t: v[0],
                geodetic: GeodeticCoord {
                    lat: v[4].to_radians(),
                    lon: v[5].to_radians(),
                    height: v[6],
                },
                velocity: Vector3::new(v[7], v[8], v[9]),
                orientation: UnitQuaternion::new_normalize(Quaternion::new(v[10], v[11], v[12], v[13])),
            })
        })
        .collect()
}

pub fn write_estimate_csv(path: &Path, est: &[PoseEstimate]) -> Result<(), DataError> {
    write_rows(
        path,
        ESTIMATE_HEADER,
        est.iter().map(|e| {
            let q = e.orientation;
            let mut row: Vec<String> = [
                e.t,
                e.position.east,
                e.position.north,
                e.position.up,
                e.velocity.x,
                e.velocity.y,
                e.velocity.z,
                q.w,
                q.i,
                q.j,
                q.k,
            ]
            .iter()
            .chain(e.cov_diag.iter())
            .map(|v| fmt_num(*v))
            .collect();
            row.push(fmt_num(e.cov_trace()));
            match e.update {
                Some(u) => {
                    row.push(fmt_num(u.nis));
                    row.push(if u.accepted { "1" } else { "0" }.to_string());
                }
                None => {
                    row.push(String::new());
                    row.push(String::new());
                }
            }
            row.push(if e.diverged { "1" } else { "0" }.to_string());
            row
        }),
    )
}

/// Position columns of an estimate file, for comparing runs.
pub fn read_estimate_positions(path: &Path) -> Result<Vec<(f64, LocalEnu)>, DataError> {
    read_rows(path, ESTIMATE_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            let v = parse_fields(path, line, &f[..4])?;
            Ok((v[0], LocalEnu::new(v[1], v[2], v[3])))
        })
        .collect()
}

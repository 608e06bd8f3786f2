//! KITTI raw OXTS records (`oxts/timestamps.txt` + `oxts/data/*.txt`).

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use nalgebra::{UnitQuaternion, Vector3};
use thiserror::Error;

use crate::gnss::GnssFix;
use crate::strapdown::ImuSample;

pub const OXTS_FIELD_COUNT: usize = 30;

#[derive(Debug, Error)]
pub enum KittiError {
    #[error("{context}: malformed OXTS record: {reason}")]
    MalformedRecord { context: String, reason: String },
    #[error("missing timestamps file {0}")]
    MissingTimestamps(PathBuf),
    #[error("{path}: line {line}: cannot parse timestamp '{text}'")]
    BadTimestamp {
        path: PathBuf,
        line: usize,
        text: String,
    },
    #[error("record count mismatch: {data_files} data files, {timestamps} timestamps")]
    RecordCountMismatch { data_files: usize, timestamps: usize },
    #[error("OXTS sequence is empty")]
    EmptySequence,
    #[error("timestamps are not strictly increasing at record {index}")]
    NonMonotonicTime { index: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One OXTS frame, transcribed as stored (degrees for lat/lon).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OxtsRecord {
    pub lat: f64,
    pub lon: f64,
    pub alt: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub vn: f64,
    pub ve: f64,
    pub vf: f64,
    pub vl: f64,
    pub vu: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub af: f64,
    pub al: f64,
    pub au: f64,
    pub wx: f64,
    pub wy: f64,
    pub wz: f64,
    pub wf: f64,
    pub wl: f64,
    pub wu: f64,
    pub pos_accuracy: f64,
    pub vel_accuracy: f64,
    pub navstat: f64,
    pub numsats: f64,
    pub posmode: f64,
    pub velmode: f64,
    pub orimode: f64,
}

impl OxtsRecord {
    fn from_fields(v: &[f64; OXTS_FIELD_COUNT]) -> Self {
        Self {
            lat: v[0],
            lon: v[1],
            alt: v[2],
            roll: v[3],
            pitch: v[4],
            yaw: v[5],
            vn: v[6],
            ve: v[7],
            vf: v[8],
            vl: v[9],
            vu: v[10],
            ax: v[11],
            ay: v[12],
            az: v[13],
            af: v[14],
            al: v[15],
            au: v[16],
            wx: v[17],
            wy: v[18],
            wz: v[19],
            wf: v[20],
            wl: v[21],
            wu: v[22],
            pos_accuracy: v[23],
            vel_accuracy: v[24],
            navstat: v[25],
            numsats: v[26],
            posmode: v[27],
            velmode: v[28],
            orimode: v[29],
        }
    }

    /// Body-frame (forward, left, up) rates and specific force.
    pub fn imu_sample(&self, t: f64) -> ImuSample {
        ImuSample::new(
            t,
            Vector3::new(self.wf, self.wl, self.wu),
            Vector3::new(self.af, self.al, self.au),
        )
    }

    pub fn gnss_fix(&self, t: f64) -> GnssFix {
        GnssFix::from_degrees(t, self.lat, self.lon, self.alt)
    }

    /// Velocity (east, north, up) and body-to-ENU attitude reported by the unit.
    pub fn initial_state_hint(&self) -> (Vector3<f64>, UnitQuaternion<f64>) {
        (
            Vector3::new(self.ve, self.vn, self.vu),
            UnitQuaternion::from_euler_angles(self.roll, self.pitch, self.yaw),
        )
    }
}

/// Parses one whitespace-separated OXTS line. `context` names the source in
/// error messages.
pub fn parse_oxts_record(line: &str, context: &str) -> Result<OxtsRecord, KittiError> {
    let malformed = |reason: String| KittiError::MalformedRecord {
        context: context.to_string(),
        reason,
    };
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != OXTS_FIELD_COUNT {
        return Err(malformed(format!(
            "expected {OXTS_FIELD_COUNT} fields, found {}",
            tokens.len()
        )));
    }
    let mut v = [0.0; OXTS_FIELD_COUNT];
    for (i, tok) in tokens.iter().enumerate() {
        v[i] = tok
            .parse::<f64>()
            .map_err(|_| malformed(format!("field {} '{tok}' is not numeric", i + 1)))?;
    }
    let rec = OxtsRecord::from_fields(&v);
    if !(rec.lat.abs() <= 90.0 && rec.lon.abs() <= 180.0) {
        return Err(malformed(format!(
            "lat/lon ({}, {}) out of range",
            rec.lat, rec.lon
        )));
    }
    Ok(rec)
}

pub fn parse_timestamp(text: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(text.trim(), "%Y-%m-%d %H:%M:%S%.f").ok()
}

fn read(path: &Path) -> Result<String, KittiError> {
    fs::read_to_string(path).map_err(|source| KittiError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Records with timestamps in seconds relative to the first record.
#[derive(Debug, Clone, PartialEq)]
pub struct OxtsSequence {
    pub times: Vec<f64>,
    pub records: Vec<OxtsRecord>,
}

impl OxtsSequence {
    pub fn imu(&self) -> Vec<ImuSample> {
        self.times
            .iter()
            .zip(&self.records)
            .map(|(t, r)| r.imu_sample(*t))
            .collect()
    }

    /// Fixes decimated to 1 Hz: the first record of each whole-second bucket.
    pub fn gnss(&self) -> Vec<GnssFix> {
        let mut out = Vec::new();
        let mut last_bucket = None;
        for (t, r) in self.times.iter().zip(&self.records) {
            let bucket = t.floor() as i64;
            if last_bucket != Some(bucket) {
                last_bucket = Some(bucket);
                out.push(r.gnss_fix(*t));
            }
        }
        out
    }
}

/// Loads `<dir>/oxts/timestamps.txt` and `<dir>/oxts/data/*.txt`.
pub fn load_records(dir: &Path) -> Result<OxtsSequence, KittiError> {
    let oxts = dir.join("oxts");
    let ts_path = oxts.join("timestamps.txt");
    if !ts_path.is_file() {
        return Err(KittiError::MissingTimestamps(ts_path));
    }
    let ts_text = read(&ts_path)?;
    let mut stamps = Vec::new();
    for (i, line) in ts_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let dt = parse_timestamp(line).ok_or_else(|| KittiError::BadTimestamp {
            path: ts_path.clone(),
            line: i + 1,
            text: line.to_string(),
        })?;
        stamps.push(dt);
    }

    let data_dir = oxts.join("data");
    let mut files: Vec<PathBuf> = match fs::read_dir(&data_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(source) => {
            return Err(KittiError::Io {
                path: data_dir,
                source,
            })
        }
    };
    files.sort();

    if files.len() != stamps.len() {
        return Err(KittiError::RecordCountMismatch {
            data_files: files.len(),
            timestamps: stamps.len(),
        });
    }
    if files.is_empty() {
        return Err(KittiError::EmptySequence);
    }

    let mut records = Vec::with_capacity(files.len());
    for f in &files {
        let text = read(f)?;
        let line = text.lines().next().unwrap_or("");
        records.push(parse_oxts_record(line, &f.display().to_string())?);
    }

    let t0 = stamps[0];
    let times: Vec<f64> = stamps
        .iter()
        .map(|s| {
            let d = *s - t0;
            d.num_nanoseconds()
                .map_or(d.num_milliseconds() as f64 * 1e-3, |ns| ns as f64 * 1e-9)
        })
        .collect();
    if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(KittiError::NonMonotonicTime { index: i + 1 });
    }
    Ok(OxtsSequence { times, records })
}

/// IMU samples at the recording rate and GNSS fixes at 1 Hz.
pub fn load_sequence(dir: &Path) -> Result<(Vec<ImuSample>, Vec<GnssFix>), KittiError> {
    let seq = load_records(dir)?;
    Ok((seq.imu(), seq.gnss()))
}

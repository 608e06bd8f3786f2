use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use nalgebra::{UnitQuaternion, Vector3};
use navfuse::evaluation::{
    align_and_diff, build_track, export_errors_csv, export_rmse_csv, export_track_csv, rmse,
    RmseReport,
};
use navfuse::fusion::{run_fusion, run_gnss_only, FusionConfig, InitialStd};
use navfuse::gnss::{GnssFix, GnssNoise};
use navfuse::io::{
    read_gnss_csv, read_imu_csv, read_truth_csv, write_atomic, write_estimate_csv,
    write_gnss_csv, write_imu_csv, write_truth_csv, TruthRecord,
};
use navfuse::kitti::load_records;
use navfuse::simulator::{
    corrupt, generate_truth, scenario_origin, ProfileKind, SensorCorruption, SimError,
    TrajectoryProfile,
};
use navfuse::strapdown::{ImuNoiseParams, ImuSample};

use crate::settings::{manifest, usage, CliError, Settings};
use crate::{FuseArgs, KittiArgs, SimulateArgs};

const NOISE_DEFAULTS: &[(&str, &str)] = &[
    ("gyro_std", "0.01"),
    ("accel_std", "0.05"),
    ("gyro_bias_rw", "1e-6"),
    ("accel_bias_rw", "1e-4"),
    ("gnss_sigma", "13"),
    ("gnss_outage", ""),
];

const SIMULATE_DEFAULTS: &[(&str, &str)] = &[
    ("profile", "circular"),
    ("duration", "90"),
    ("seed", ""),
    ("imu_rate", "100"),
    ("gnss_rate", "1"),
    ("speed", "5"),
    ("radius", "20"),
    ("accel", "1"),
];

const FUSE_DEFAULTS: &[(&str, &str)] = &[
    ("alpha", "1"),
    ("beta", "2"),
    ("gamma", "1"),
    ("gate", "off"),
    ("divergence_trace", "1e8"),
    ("init_from_truth", "false"),
    ("init_pos_std", "10"),
    ("init_vel_std", "1"),
    ("init_att_std", "0.1"),
    ("init_gyro_bias_std", "0.01"),
    ("init_accel_bias_std", "0.1"),
];

fn table(parts: &[&[(&'static str, &'static str)]]) -> Vec<(&'static str, &'static str)> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

fn imu_noise(s: &Settings) -> Result<ImuNoiseParams, CliError> {
    Ok(ImuNoiseParams {
        gyro_std: s.non_negative("gyro_std")?,
        accel_std: s.non_negative("accel_std")?,
        gyro_bias_rw: s.non_negative("gyro_bias_rw")?,
        accel_bias_rw: s.non_negative("accel_bias_rw")?,
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(())
}

fn write_manifest(dir: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(&dir.join("manifest.txt"), |w| w.write_all(text.as_bytes()))?;
    Ok(())
}

fn origin_extras(prefix: &str, o: &navfuse::GeodeticCoord) -> Vec<(String, String)> {
    vec![
        (format!("{prefix}_lat_deg"), format!("{:.12}", o.lat_deg())),
        (format!("{prefix}_lon_deg"), format!("{:.12}", o.lon_deg())),
        (format!("{prefix}_height_m"), format!("{:.6}", o.height)),
    ]
}

fn as_refs(v: &[(String, String)]) -> Vec<(&str, String)> {
    v.iter().map(|(k, v)| (k.as_str(), v.clone())).collect()
}

pub fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let mut flags = vec![
        ("profile", a.profile),
        ("duration", a.duration),
        ("seed", a.seed),
        ("imu_rate", a.imu_rate),
        ("gnss_rate", a.gnss_rate),
        ("speed", a.speed),
        ("radius", a.radius),
        ("accel", a.accel),
    ];
    flags.extend(a.noise.flags());
    let s = Settings::resolve(&table(&[SIMULATE_DEFAULTS, NOISE_DEFAULTS]), a.config.as_deref(), flags)?;

    if !s.is_set("seed") {
        return usage("--seed is required");
    }
    let seed = s.u64("seed")?;
    let kind: ProfileKind = match s.raw("profile").parse() {
        Ok(k) => k,
        Err(e) => return usage(e.to_string()),
    };
    let profile = TrajectoryProfile {
        kind,
        duration: s.f64("duration")?,
        imu_rate: s.f64("imu_rate")?,
        gnss_rate: s.f64("gnss_rate")?,
        speed: s.f64("speed")?,
        radius: s.f64("radius")?,
        accel: s.f64("accel")?,
    };
    if let Err(e) = profile.validate() {
        return usage(e.to_string());
    }
    let corruption = SensorCorruption {
        imu_noise: imu_noise(&s)?,
        gnss_noise: GnssNoise::uniform(s.non_negative("gnss_sigma")?),
        outages: s.windows("gnss_outage")?,
        seed,
        gnss_rate: profile.gnss_rate,
    };

    let (truth, ideal) = generate_truth(&profile).map_err(anyhow::Error::from)?;
    let (imu, gnss) = match corrupt(&truth, &ideal, &corruption) {
        Ok(v) => v,
        Err(e @ SimError::InvalidCorruption(_)) => return usage(e.to_string()),
        Err(e) => return Err(e.into()),
    };

    create_dir(&a.out)?;
    let origin = scenario_origin();
    write_truth_csv(&a.out.join("truth.csv"), &truth, &origin)?;
    write_imu_csv(&a.out.join("imu.csv"), &imu)?;
    write_gnss_csv(&a.out.join("gnss.csv"), &gnss)?;

    let mut extras = origin_extras("scenario_origin", &origin);
    extras.push(("rng".into(), "pcg32 (imu stream 1, gnss stream 2)".into()));
    extras.push(("imu_samples".into(), imu.len().to_string()));
    extras.push(("gnss_fixes".into(), gnss.len().to_string()));
    write_manifest(&a.out, &manifest(&s, &as_refs(&extras)))
}

struct Inputs {
    imu: Vec<ImuSample>,
    gnss: Vec<GnssFix>,
    truth: Option<Vec<TruthRecord>>,
    /// Velocity and attitude reported by the data source itself.
    hint: Option<(Vector3<f64>, UnitQuaternion<f64>)>,
    paths: Vec<(String, String)>,
}

fn require_file(p: &Path) -> Result<(), CliError> {
    if p.is_file() {
        Ok(())
    } else {
        Err(CliError::Runtime(anyhow::anyhow!("missing input file {}", p.display())))
    }
}

fn load_inputs(a: &FuseArgs) -> Result<Inputs, CliError> {
    let mut paths = Vec::new();
    let (imu, gnss, hint, dir) = if let Some(k) = &a.kitti {
        let seq = load_records(k)?;
        paths.push(("kitti".to_string(), k.display().to_string()));
        let hint = seq.records.first().map(|r| r.initial_state_hint());
        (seq.imu(), seq.gnss(), hint, None)
    } else {
        let dir = a.input.clone().expect("clap requires --input without --kitti");
        let imu_path = dir.join("imu.csv");
        let gnss_path = dir.join("gnss.csv");
        require_file(&imu_path)?;
        require_file(&gnss_path)?;
        paths.push(("input".to_string(), dir.display().to_string()));
        (read_imu_csv(&imu_path)?, read_gnss_csv(&gnss_path)?, None, Some(dir))
    };

    let truth_path: Option<PathBuf> = match (&a.truth, &dir) {
        (Some(t), _) => {
            require_file(t)?;
            Some(t.clone())
        }
        (None, Some(d)) if d.join("truth.csv").is_file() => Some(d.join("truth.csv")),
        _ => None,
    };
    let truth = match &truth_path {
        Some(p) => {
            paths.push(("truth".to_string(), p.display().to_string()));
            Some(read_truth_csv(p)?)
        }
        None => None,
    };
    Ok(Inputs {
        imu,
        gnss,
        truth,
        hint,
        paths,
    })
}

pub fn fuse(a: FuseArgs) -> Result<(), CliError> {
    let mut flags = vec![
        ("alpha", a.alpha.clone()),
        ("beta", a.beta.clone()),
        ("gamma", a.gamma.clone()),
        ("gate", a.gate.clone()),
        ("init_from_truth", a.init_from_truth.then(|| "true".to_string())),
    ];
    flags.extend(a.noise.flags());
    let defaults = table(&[FUSE_DEFAULTS, NOISE_DEFAULTS]);
    let s = Settings::resolve(&defaults, a.config.as_deref(), flags)?;

    let gate = match s.raw("gate") {
        "off" | "" => None,
        _ => Some(s.positive("gate")?),
    };
    let mut cfg = FusionConfig {
        alpha: s.positive("alpha")?,
        beta: s.f64("beta")?,
        gamma: s.f64("gamma")?,
        imu_noise: imu_noise(&s)?,
        gnss_noise: GnssNoise::uniform(s.positive("gnss_sigma")?),
        initial_std: InitialStd {
            position: s.positive("init_pos_std")?,
            velocity: s.positive("init_vel_std")?,
            attitude: s.positive("init_att_std")?,
            gyro_bias: s.positive("init_gyro_bias_std")?,
            accel_bias: s.positive("init_accel_bias_std")?,
        },
        gnss_gate: gate,
        divergence_trace: s.positive("divergence_trace")?,
        ..FusionConfig::default()
    };
    if let Err(e) = cfg.validate() {
        return usage(e.to_string());
    }
    let outages = s.windows("gnss_outage")?;
    let init_from_truth = s.bool("init_from_truth")?;

    let inputs = load_inputs(&a)?;
    let gnss: Vec<GnssFix> = inputs
        .gnss
        .iter()
        .filter(|f| !outages.iter().any(|&(lo, hi)| f.t >= lo && f.t < hi))
        .copied()
        .collect();

    let init = if init_from_truth {
        let Some(first) = inputs.truth.as_ref().and_then(|t| t.first()) else {
            return usage("--init-from-truth needs a truth file");
        };
        cfg.initial_velocity = first.velocity;
        cfg.initial_orientation = first.orientation;
        "truth"
    } else if let Some((v, q)) = inputs.hint {
        cfg.initial_velocity = v;
        cfg.initial_orientation = q;
        "oxts"
    } else {
        "rest"
    };

    let out = run_fusion(&inputs.imu, &gnss, &cfg).context("fusion failed")?;
    create_dir(&a.out)?;
    write_estimate_csv(&a.out.join("estimate.csv"), &out.estimates)?;

    let mut extras = inputs.paths.clone();
    extras.push(("initial_state".into(), init.into()));
    extras.push(("imu_samples".into(), inputs.imu.len().to_string()));
    extras.push(("gnss_fixes_used".into(), gnss.len().to_string()));
    extras.push((
        "diverged_estimates".into(),
        out.estimates.iter().filter(|e| e.diverged).count().to_string(),
    ));
    match &out.origin {
        Some(o) => extras.extend(origin_extras("origin", o)),
        None => extras.push(("origin".into(), "none".into())),
    }

    if let (Some(truth), Some(origin)) = (&inputs.truth, &out.origin) {
        let truth: Vec<_> = truth.iter().map(|r| r.in_frame(origin)).collect();
        let fused = align_and_diff(&out.estimates, &truth)?;
        let raw = align_and_diff(&run_gnss_only(&gnss, origin)?, &truth)?;
        export_errors_csv(&fused, &a.out.join("errors.csv"))?;
        export_errors_csv(&raw, &a.out.join("errors_gnss.csv"))?;
        export_track_csv(&build_track(&out.estimates, &truth)?, &a.out.join("track.csv"))?;
        let mut report = RmseReport::default();
        report.push("GNSS", rmse(&raw)?);
        report.push("GNSS-IMU", rmse(&fused)?);
        export_rmse_csv(&report, &a.out.join("rmse.csv"))?;
    }
    write_manifest(&a.out, &manifest(&s, &as_refs(&extras)))
}

pub fn kitti_convert(a: KittiArgs) -> Result<(), CliError> {
    let seq = load_records(&a.kitti)?;
    let imu = seq.imu();
    let gnss = seq.gnss();
    create_dir(&a.out)?;
    write_imu_csv(&a.out.join("imu.csv"), &imu)?;
    write_gnss_csv(&a.out.join("gnss.csv"), &gnss)?;
    let text = format!(
        "tool=navfuse {}\nkitti={}\nimu_samples={}\ngnss_fixes={}\n",
        env!("CARGO_PKG_VERSION"),
        a.kitti.display(),
        imu.len(),
        gnss.len()
    );
    write_manifest(&a.out, &text)
}

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use settings::CliError;

/// GNSS/IMU fusion with an unscented Kalman filter.
#[derive(Debug, Parser)]
#[command(name = "navfuse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate truth, IMU and GNSS streams for a synthetic trajectory.
    Simulate(SimulateArgs),
    /// Run the filter over IMU/GNSS streams and evaluate against truth.
    Fuse(FuseArgs),
    /// Convert a KITTI raw OXTS directory into imu.csv and gnss.csv.
    KittiConvert(KittiArgs),
}

/// Flags shared by commands that model sensor noise.
#[derive(Debug, Args)]
struct NoiseArgs {
    /// Gyroscope white noise, rad/s.
    #[arg(long)]
    gyro_std: Option<String>,
    /// Accelerometer white noise, m/s^2.
    #[arg(long)]
    accel_std: Option<String>,
    /// Gyroscope bias random walk, rad/s^2.
    #[arg(long)]
    gyro_bias_rw: Option<String>,
    /// Accelerometer bias random walk, m/s^3.
    #[arg(long)]
    accel_bias_rw: Option<String>,
    /// GNSS noise per local axis, m.
    #[arg(long)]
    gnss_sigma: Option<String>,
    /// GNSS outage window `start:end` in seconds; repeat for several.
    #[arg(long = "gnss-outage", value_name = "START:END")]
    gnss_outage: Vec<String>,
}

impl NoiseArgs {
    fn flags(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("gyro_std", self.gyro_std.clone()),
            ("accel_std", self.accel_std.clone()),
            ("gyro_bias_rw", self.gyro_bias_rw.clone()),
            ("accel_bias_rw", self.accel_bias_rw.clone()),
            ("gnss_sigma", self.gnss_sigma.clone()),
            (
                "gnss_outage",
                (!self.gnss_outage.is_empty()).then(|| self.gnss_outage.join(",")),
            ),
        ]
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// stationary, straight, circular or figure-eight
    #[arg(long)]
    profile: Option<String>,
    /// seconds
    #[arg(long)]
    duration: Option<String>,
    /// Random seed. Required, here or in the config file.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    imu_rate: Option<String>,
    #[arg(long)]
    gnss_rate: Option<String>,
    /// m/s, circular and figure-eight profiles
    #[arg(long)]
    speed: Option<String>,
    /// m, circular and figure-eight profiles
    #[arg(long)]
    radius: Option<String>,
    /// m/s^2, straight profile
    #[arg(long)]
    accel: Option<String>,
    #[command(flatten)]
    noise: NoiseArgs,
    /// key=value file; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FuseArgs {
    /// Directory with imu.csv and gnss.csv, and optionally truth.csv.
    #[arg(long, conflicts_with = "kitti", required_unless_present = "kitti")]
    input: Option<PathBuf>,
    /// KITTI raw drive directory (containing oxts/).
    #[arg(long)]
    kitti: Option<PathBuf>,
    /// Truth file; defaults to truth.csv in the input directory when present.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Start from the first truth velocity and attitude.
    #[arg(long)]
    init_from_truth: bool,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    /// Chi-square innovation gate (3 dof); `off` to accept every fix.
    #[arg(long)]
    gate: Option<String>,
    #[command(flatten)]
    noise: NoiseArgs,
    /// key=value file; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct KittiArgs {
    /// KITTI raw drive directory (containing oxts/).
    #[arg(long)]
    kitti: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fuse(a) => commands::fuse(a),
        Command::KittiConvert(a) => commands::kitti_convert(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("navfuse: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                CliError::Runtime(_) => ExitCode::from(1),
            }
        }
    }
}

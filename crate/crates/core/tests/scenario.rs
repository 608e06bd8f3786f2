use navfuse::evaluation::{align_and_diff, rmse, ErrorSeries};
use navfuse::fusion::{run_fusion, run_gnss_only, FusionConfig, InitialStd};
use navfuse::gnss::GnssNoise;
use navfuse::strapdown::ImuNoiseParams;
use navfuse::geodesy::{enu_to_geodetic, geodetic_to_enu, GeodeticCoord};
use navfuse::simulator::{
    corrupt, generate_truth, scenario_origin, ProfileKind, SensorCorruption, TrajectoryProfile,
    TruthPose,
};

fn reframe(truth: &[TruthPose], origin: &GeodeticCoord) -> Vec<TruthPose> {
    let scen = scenario_origin();
    truth
        .iter()
        .map(|p| TruthPose {
            position: geodetic_to_enu(&enu_to_geodetic(&p.position, &scen).unwrap(), origin),
            ..*p
        })
        .collect()
}

// Filter tuned to the corruption it will see; initial state from the truth.
fn fused_errors(
    kind: ProfileKind,
    duration: f64,
    c: &SensorCorruption,
    init: InitialStd,
    gnss_noise: Option<GnssNoise>,
) -> ErrorSeries {
    let profile = TrajectoryProfile::new(kind, duration);
    let (truth, ideal) = generate_truth(&profile).unwrap();
    let (imu, gnss) = corrupt(&truth, &ideal, c).unwrap();
    let floor = |v: f64| v.max(1e-9);
    let cfg = FusionConfig {
        initial_velocity: truth[0].velocity,
        initial_orientation: truth[0].orientation,
        imu_noise: ImuNoiseParams {
            gyro_std: floor(c.imu_noise.gyro_std),
            accel_std: floor(c.imu_noise.accel_std),
            gyro_bias_rw: floor(c.imu_noise.gyro_bias_rw),
            accel_bias_rw: floor(c.imu_noise.accel_bias_rw),
        },
        gnss_noise: gnss_noise.unwrap_or(GnssNoise::new(
            floor(c.gnss_noise.sigma_e),
            floor(c.gnss_noise.sigma_n),
            floor(c.gnss_noise.sigma_u),
        )),
        initial_std: init,
        ..FusionConfig::default()
    };
    let out = run_fusion(&imu, &gnss, &cfg).unwrap();
    let t = reframe(&truth, &out.origin.unwrap());
    align_and_diff(&out.estimates, &t).unwrap()
}

const TIGHT: InitialStd = InitialStd {
    position: 1e-3,
    velocity: 1e-3,
    attitude: 1e-4,
    gyro_bias: 1e-6,
    accel_bias: 1e-5,
};

#[test]
fn zero_corruption_tracks_truth() {
    for kind in [ProfileKind::Circular, ProfileKind::FigureEight, ProfileKind::StraightConstantAccel] {
        let e = fused_errors(kind, 90.0, &SensorCorruption::noiseless(7), TIGHT, None);
        let r = rmse(&e).unwrap().norm();
        assert!(r <= 0.1, "{kind}: {r}");
    }
}

#[test]
fn stationary_beats_measurement_noise() {
    // Exact fixes, filter told they are 1 m.
    let c = SensorCorruption::noiseless(11);
    let e = fused_errors(
        ProfileKind::Stationary,
        30.0,
        &c,
        InitialStd::default(),
        Some(GnssNoise::uniform(1.0)),
    );
    let r = rmse(&e.window(10.0, f64::INFINITY)).unwrap().norm();
    assert!(r < 1.0, "{r}");
}

#[test]
fn fused_beats_gnss_with_default_noise() {
    let profile = TrajectoryProfile::new(ProfileKind::Circular, 90.0);
    let (truth, ideal) = generate_truth(&profile).unwrap();
    let (imu, gnss) = corrupt(&truth, &ideal, &SensorCorruption::new(42)).unwrap();
    let cfg = FusionConfig {
        initial_velocity: truth[0].velocity,
        initial_orientation: truth[0].orientation,
        ..FusionConfig::default()
    };
    let out = run_fusion(&imu, &gnss, &cfg).unwrap();
    let origin = out.origin.unwrap();
    let t = reframe(&truth, &origin);
    let fused = rmse(&align_and_diff(&out.estimates, &t).unwrap()).unwrap();
    let raw = rmse(&align_and_diff(&run_gnss_only(&gnss, &origin).unwrap(), &t).unwrap()).unwrap();
    assert!(fused.x < raw.x && fused.y < raw.y && fused.z < raw.z, "{fused:?} vs {raw:?}");
}

#[test]
fn gnss_noise_calibration_300_fixes() {
    let profile = TrajectoryProfile::new(ProfileKind::Circular, 299.5);
    let (truth, ideal) = generate_truth(&profile).unwrap();
    let (_, gnss) = corrupt(&truth, &ideal, &SensorCorruption::new(42)).unwrap();
    assert_eq!(gnss.len(), 300);
    // Evaluate in the scenario frame so the baseline sees raw noise only.
    let r = rmse(&align_and_diff(&run_gnss_only(&gnss, &scenario_origin()).unwrap(), &truth).unwrap())
        .unwrap();
    for v in [r.x, r.y, r.z] {
        assert!((11.7..=14.3).contains(&v), "{r:?}");
    }
}

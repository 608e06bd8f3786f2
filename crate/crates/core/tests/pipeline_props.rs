use nalgebra::{DMatrix, DVector};
use navfuse::evaluation::{rmse, ErrorSeries};
use navfuse::fusion::{run_fusion, run_fusion_with, FilterEvent, FusionConfig};
use navfuse::geodesy::{geodetic_to_ecef, LocalEnu};
use navfuse::gnss::{fix_to_local, measurement_fn, GnssFix};
use navfuse::simulator::{corrupt, generate_truth, ProfileKind, SensorCorruption, TrajectoryProfile};
use navfuse::strapdown::{NavState, ERROR_DIM};
use navfuse::ukf::{is_healthy_covariance, unscented_update, GaussianBelief, SigmaParams};
use proptest::prelude::*;

fn fix() -> impl Strategy<Value = GnssFix> {
    (48.0..50.0f64, 7.0..9.0f64, -100.0..3000.0f64).prop_map(|(la, lo, h)| GnssFix::from_degrees(0.0, la, lo, h))
}

fn spd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_map(move |v| {
        let m = DMatrix::from_vec(n, n, v);
        &m * m.transpose() + DMatrix::identity(n, n) * 0.1
    })
}

fn series() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64), 1..60)
}

fn to_series(rows: &[(f64, f64, f64)]) -> ErrorSeries {
    let mut s = ErrorSeries::default();
    for (i, (x, y, z)) in rows.iter().enumerate() {
        s.push(i as f64, LocalEnu::new(*x, *y, *z));
    }
    s
}

proptest! {
    #[test]
    fn local_distance_matches_chord(a in fix(), b in fix(), o in fix()) {
        let origin = o.geodetic();
        let d_local = (fix_to_local(&a, &origin).to_vector() - fix_to_local(&b, &origin).to_vector()).norm();
        let d_ecef = (geodetic_to_ecef(&a.geodetic()).to_vector() - geodetic_to_ecef(&b.geodetic()).to_vector()).norm();
        prop_assert!((d_local - d_ecef).abs() <= 1e-9 * d_ecef.max(1.0));
    }

    #[test]
    fn measurement_ut_reproduces_position_block(p in spd(ERROR_DIM)) {
        // With a negligible R the innovation covariance is the position block.
        let belief = GaussianBelief::new(NavState::default(), p.clone()).unwrap();
        let r = DMatrix::identity(3, 3) * 1e-300;
        let out = unscented_update(&belief, measurement_fn, &r, &DVector::zeros(3), &SigmaParams::standard(ERROR_DIM)).unwrap();
        let block = p.view((0, 0), (3, 3)).into_owned();
        prop_assert!((&out.innovation_cov - &block).amax() <= 1e-10 * block.amax());
    }

    #[test]
    fn rmse_ignores_row_order(rows in series(), seed in any::<u64>()) {
        let mut shuffled = rows.clone();
        let n = shuffled.len();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let a = rmse(&to_series(&rows)).unwrap();
        let b = rmse(&to_series(&shuffled)).unwrap();
        for (x, y) in [(a.x, b.x), (a.y, b.y), (a.z, b.z)] {
            prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
        }
    }

    #[test]
    fn rmse_scales_linearly(rows in series(), c in -100.0..100.0f64) {
        let scaled: Vec<_> = rows.iter().map(|(x, y, z)| (x * c, y * c, z * c)).collect();
        let a = rmse(&to_series(&rows)).unwrap();
        let b = rmse(&to_series(&scaled)).unwrap();
        for (x, y) in [(a.x, b.x), (a.y, b.y), (a.z, b.z)] {
            prop_assert!((y - c.abs() * x).abs() <= 1e-12 * y.max(1.0));
        }
    }
}

fn scenario(seed: u64, outages: Vec<(f64, f64)>, duration: f64) -> (Vec<navfuse::ImuSample>, Vec<GnssFix>, FusionConfig) {
    let profile = TrajectoryProfile::new(ProfileKind::FigureEight, duration);
    let (truth, ideal) = generate_truth(&profile).unwrap();
    let mut c = SensorCorruption::new(seed);
    c.outages = outages;
    let (imu, gnss) = corrupt(&truth, &ideal, &c).unwrap();
    let cfg = FusionConfig {
        initial_velocity: truth[0].velocity,
        initial_orientation: truth[0].orientation,
        ..FusionConfig::default()
    };
    (imu, gnss, cfg)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn pipeline_invariants(seed in any::<u64>(), start in 5.0..20.0f64, len in 2.0..10.0f64) {
        let (imu, gnss, cfg) = scenario(seed, vec![(start, start + len)], 30.0);
        let mut healthy = true;
        let mut contracting = true;
        let out = run_fusion_with(&imu, &gnss, &cfg, |ev| match ev {
            FilterEvent::Predicted { belief, .. } => healthy &= is_healthy_covariance(&belief.cov),
            FilterEvent::Updated { prior, posterior, update, .. } => {
                healthy &= is_healthy_covariance(&posterior.cov);
                if update.accepted {
                    contracting &= posterior.cov.trace() < prior.cov.trace();
                }
            }
        })
        .unwrap();
        prop_assert!(healthy);
        prop_assert!(contracting);

        // One estimate per IMU sample, same timestamps.
        prop_assert_eq!(out.estimates.len(), imu.len());
        prop_assert!(out.estimates.iter().zip(&imu).all(|(e, u)| e.t == u.t));

        // Prediction-only stretch between the last fix before and the first
        // fix after the outage.
        let gap: Vec<_> = out
            .estimates
            .iter()
            .skip_while(|e| e.t < start)
            .take_while(|e| e.update.is_none())
            .collect();
        prop_assert!(gap.windows(2).all(|w| w[1].cov_trace() >= w[0].cov_trace()));

        let again = run_fusion(&imu, &gnss, &cfg).unwrap();
        prop_assert_eq!(again, out);
    }
}

#[test]
fn no_gnss_is_dead_reckoning() {
    let (imu, _, cfg) = scenario(3, Vec::new(), 5.0);
    let out = run_fusion(&imu, &[], &cfg).unwrap();
    assert_eq!(out.origin, None);
    assert_eq!(out.estimates.len(), imu.len());
    assert!(out.estimates.windows(2).all(|w| w[1].cov_trace() >= w[0].cov_trace()));
}

use nalgebra::{UnitQuaternion, Vector3};
use navfuse::strapdown::{gravity_enu, propagate, ImuSample, NavState, GRAVITY};
use proptest::prelude::*;

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn state() -> impl Strategy<Value = NavState> {
    (vec3(100.0), vec3(20.0), vec3(3.0), vec3(0.01), vec3(0.1)).prop_map(|(p, v, r, bg, ba)| {
        NavState {
            position: p,
            velocity: v,
            orientation: UnitQuaternion::from_scaled_axis(r),
            gyro_bias: bg,
            accel_bias: ba,
        }
    })
}

// Smooth body-frame inputs: sinusoidal rates and specific force.
#[derive(Debug, Clone, Copy)]
struct Profile {
    w_amp: Vector3<f64>,
    a_amp: Vector3<f64>,
    freq: f64,
}

impl Profile {
    fn sample(&self, t: f64) -> ImuSample {
        let s = (self.freq * t).sin();
        let c = (self.freq * t).cos();
        ImuSample::new(
            t,
            self.w_amp * s,
            self.a_amp * c + Vector3::new(0.0, 0.0, GRAVITY),
        )
    }

    fn endpoint(&self, dt: f64, duration: f64) -> NavState {
        let steps = (duration / dt).round() as usize;
        let mut s = NavState::default();
        for k in 0..steps {
            s = propagate(&s, &self.sample(k as f64 * dt), dt);
        }
        s
    }
}

fn profile() -> impl Strategy<Value = Profile> {
    (vec3(0.2), vec3(1.0), 0.2..1.5f64).prop_map(|(w_amp, a_amp, freq)| Profile { w_amp, a_amp, freq })
}

proptest! {
    #[test]
    fn quaternion_stays_unit(s in state(), gyro in vec3(10.0), accel in vec3(50.0), dt in 1e-4..0.1f64) {
        let out = propagate(&s, &ImuSample::new(0.0, gyro, accel), dt);
        prop_assert!((1.0 - out.orientation.into_inner().norm()).abs() <= 1e-9);
        prop_assert!(out.is_finite());
    }

    #[test]
    fn propagation_is_deterministic(s in state(), gyro in vec3(1.0), accel in vec3(20.0), dt in 1e-4..0.1f64) {
        let u = ImuSample::new(0.0, gyro, accel);
        prop_assert_eq!(propagate(&s, &u, dt), propagate(&s, &u, dt));
    }

    #[test]
    fn gravity_compensated_rest_is_fixed(p in vec3(1e4), r in vec3(3.0), dt in 1e-3..0.1f64) {
        let q = UnitQuaternion::from_scaled_axis(r);
        let s = NavState { position: p, orientation: q, ..NavState::default() };
        // Specific force that cancels gravity in the body frame.
        let f = q.inverse() * (-gravity_enu());
        let next = propagate(&s, &ImuSample::new(0.0, Vector3::zeros(), f), dt);
        prop_assert!((next.position - s.position).amax() <= 1e-12 * p.amax().max(1.0));
        prop_assert!(next.velocity.amax() <= 1e-12);
        prop_assert!((next.orientation.coords - q.coords).amax() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convergence_order_at_least_one(p in profile()) {
        let dt = 0.005;
        let ends: Vec<NavState> = [dt, dt / 2.0, dt / 4.0].iter().map(|h| p.endpoint(*h, 10.0)).collect();
        let d1 = (ends[0].position - ends[1].position).norm();
        let d2 = (ends[1].position - ends[2].position).norm();
        let order = (d1 / d2).log2();
        // First-order scheme: the estimate approaches 1 with an O(dt) offset.
        prop_assert!(order >= 1.0 - dt || d1 < 1e-9, "order {} ({} / {})", order, d1, d2);
    }
}

#[test]
fn stationary_fixed_point_over_1000_steps() {
    let mut s = NavState::default();
    let u = ImuSample::new(0.0, Vector3::zeros(), Vector3::new(0.0, 0.0, GRAVITY));
    for _ in 0..1000 {
        let next = propagate(&s, &u, 0.01);
        assert!((next.position - s.position).amax() <= 1e-12);
        assert!((next.velocity - s.velocity).amax() <= 1e-12);
        assert!((next.orientation.coords - s.orientation.coords).amax() <= 1e-12);
        s = next;
    }
}

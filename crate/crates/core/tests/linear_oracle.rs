//! UKF against a plain Kalman filter on a linear-Gaussian system.

use nalgebra::{DMatrix, DVector};
use navfuse::ukf::{unscented_predict, unscented_update, GaussianBelief, SigmaParams};
use rand::Rng;
use rand_distr::StandardNormal;
use rand_pcg::Pcg32;

struct Kf {
    x: DVector<f64>,
    p: DMatrix<f64>,
}

impl Kf {
    fn predict(&mut self, a: &DMatrix<f64>, q: &DMatrix<f64>) {
        self.x = a * &self.x;
        self.p = a * &self.p * a.transpose() + q;
    }

    fn update(&mut self, h: &DMatrix<f64>, r: &DMatrix<f64>, y: &DVector<f64>) {
        let s = h * &self.p * h.transpose() + r;
        let k = &self.p * h.transpose() * s.try_inverse().unwrap();
        self.x = &self.x + &k * (y - h * &self.x);
        let i = DMatrix::identity(self.x.len(), self.x.len());
        // Joseph form.
        let ikh = &i - &k * h;
        self.p = &ikh * &self.p * ikh.transpose() + &k * r * k.transpose();
    }
}

fn gauss_matrix(rng: &mut Pcg32, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn spd(rng: &mut Pcg32, n: usize, scale: f64) -> DMatrix<f64> {
    let m = gauss_matrix(rng, n, n);
    (&m * m.transpose() + DMatrix::identity(n, n)) * scale
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

#[test]
fn ukf_matches_kalman_filter_over_100_steps() {
    let started = std::time::Instant::now();
    let mut rng = Pcg32::new(2024, 7);
    let n = 4;
    let m = 2;
    // Mildly contracting dynamics keep the trajectory well scaled.
    let a = DMatrix::identity(n, n) * 0.9 + gauss_matrix(&mut rng, n, n) * 0.1;
    let h = gauss_matrix(&mut rng, m, n);
    let q = spd(&mut rng, n, 0.01);
    let r = spd(&mut rng, m, 0.5);
    let params = SigmaParams::standard(n);

    let x0 = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
    let p0 = spd(&mut rng, n, 1.0);
    let mut kf = Kf { x: x0.clone(), p: p0.clone() };
    let mut ukf = GaussianBelief::new(x0, p0).unwrap();

    let mut truth = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        truth = &a * truth;
        let y = &h * &truth + DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));

        kf.predict(&a, &q);
        ukf = unscented_predict(&ukf, |x| &a * x, &q, &params).unwrap();
        kf.update(&h, &r, &y);
        ukf = unscented_update(&ukf, |x| &h * x, &r, &y, &params).unwrap().posterior;

        let dx = (&ukf.mean - &kf.x).norm() / kf.x.norm().max(1.0);
        worst = worst.max(dx).max(rel(&ukf.cov, &kf.p));
    }
    assert!(worst < 1e-8, "max relative deviation {worst:e}");
    assert!(started.elapsed().as_secs_f64() < 1.0);
}

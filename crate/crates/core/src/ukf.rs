//! Unscented Kalman filter primitives.
//!
//! The filter works over any [`SigmaState`]: plain vectors for textbook
//! problems, or a nominal state with a tangent-space error parameterization
//! such as [`crate::strapdown::NavState`]. Measurements are always vectors.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UkfError {
    #[error("invalid sigma-point scaling: n + kappa = {0} must be positive")]
    InvalidScaling(f64),
    #[error("covariance square root failed: matrix is not positive semidefinite")]
    DecompositionFailure,
    #[error("innovation covariance is singular (rcond estimate {rcond:e})")]
    SingularInnovationCov { rcond: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A state that sigma points can be spread around.
///
/// `retract` applies a tangent-space offset and `local` recovers one, so that
/// `x.local(&x.retract(d)) == d` for small `d`.
pub trait SigmaState: Clone {
    fn dim(&self) -> usize;
    fn retract(&self, delta: &DVector<f64>) -> Self;
    /// Offset from `self` to `other`, i.e. `other ⊟ self`.
    fn local(&self, other: &Self) -> DVector<f64>;
    fn weighted_mean(points: &[Self], weights: &[f64]) -> Self;
}

impl SigmaState for DVector<f64> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn retract(&self, delta: &DVector<f64>) -> Self {
        self + delta
    }

    fn local(&self, other: &Self) -> DVector<f64> {
        other - self
    }

    fn weighted_mean(points: &[Self], weights: &[f64]) -> Self {
        let mut mean = DVector::zeros(points[0].len());
        for (p, w) in points.iter().zip(weights) {
            mean.axpy(*w, p, 1.0);
        }
        mean
    }
}

/// Mean and covariance. The covariance lives in the tangent space of the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief<S> {
    pub mean: S,
    pub cov: DMatrix<f64>,
}

impl<S: SigmaState> GaussianBelief<S> {
    pub fn new(mean: S, cov: DMatrix<f64>) -> Result<Self, UkfError> {
        let n = mean.dim();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(UkfError::DimensionMismatch {
                expected: n,
                got: cov.nrows(),
            });
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }
}

/// Sigma-point scaling. `kappa = alpha^2 (n + gamma) - n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub n: usize,
}

impl SigmaParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, n: usize) -> Self {
        Self { alpha, beta, gamma, n }
    }

    /// alpha = 1, beta = 2, gamma = 1.
    pub fn standard(n: usize) -> Self {
        Self::new(1.0, 2.0, 1.0, n)
    }

    pub fn kappa(&self) -> f64 {
        let n = self.n as f64;
        self.alpha * self.alpha * (n + self.gamma) - n
    }

    /// `n + kappa`, the scale applied to the covariance before the square root.
    pub fn spread(&self) -> f64 {
        self.n as f64 + self.kappa()
    }

    fn validate(&self) -> Result<(), UkfError> {
        let s = self.spread();
        if self.n == 0 || !(s > 0.0) || !s.is_finite() || !self.beta.is_finite() {
            return Err(UkfError::InvalidScaling(s));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

pub fn compute_weights(params: &SigmaParams) -> Result<Weights, UkfError> {
    params.validate()?;
    let kappa = params.kappa();
    let spread = params.spread();
    let count = 2 * params.n + 1;
    let wi = 1.0 / (2.0 * spread);
    let mut mean = vec![wi; count];
    let mut cov = vec![wi; count];
    mean[0] = kappa / spread;
    cov[0] = kappa / spread + (1.0 - params.alpha * params.alpha + params.beta);
    Ok(Weights { mean, cov })
}

/// `2n + 1` points with their weights. `offsets[i]` is the tangent-space
/// displacement of `points[i]` from the mean (zero for the center point).
#[derive(Debug, Clone)]
pub struct SigmaSet<S> {
    pub points: Vec<S>,
    pub offsets: Vec<DVector<f64>>,
    pub w_mean: Vec<f64>,
    pub w_cov: Vec<f64>,
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Lower-triangular square root of a PSD matrix.
///
/// Cholesky of the symmetrized matrix; on failure a single diagonal jitter of
/// `1e-9 * trace / n` is added and the factorization retried. The zero matrix
/// has the zero square root.
pub fn covariance_sqrt(p: &DMatrix<f64>) -> Result<DMatrix<f64>, UkfError> {
    let n = p.nrows();
    let sym = symmetrize(p);
    if sym.iter().all(|v| *v == 0.0) {
        return Ok(DMatrix::zeros(n, n));
    }
    if let Some(chol) = sym.clone().cholesky() {
        return Ok(chol.l());
    }
    let jitter = 1e-9 * sym.trace() / n as f64;
    if jitter > 0.0 && jitter.is_finite() {
        let jittered = sym + DMatrix::identity(n, n) * jitter;
        if let Some(chol) = jittered.cholesky() {
            return Ok(chol.l());
        }
    }
    Err(UkfError::DecompositionFailure)
}

pub fn generate_sigma_points<S: SigmaState>(
    belief: &GaussianBelief<S>,
    params: &SigmaParams,
) -> Result<SigmaSet<S>, UkfError> {
    let n = belief.dim();
    if params.n != n {
        return Err(UkfError::DimensionMismatch {
            expected: n,
            got: params.n,
        });
    }
    let weights = compute_weights(params)?;
    let root = covariance_sqrt(&(&belief.cov * params.spread()))?;

    let mut points = Vec::with_capacity(2 * n + 1);
    let mut offsets = Vec::with_capacity(2 * n + 1);
    points.push(belief.mean.clone());
    offsets.push(DVector::zeros(n));
    for sign in [1.0, -1.0] {
        for i in 0..n {
            let d: DVector<f64> = root.column(i) * sign;
            points.push(belief.mean.retract(&d));
            offsets.push(d);
        }
    }
    Ok(SigmaSet {
        points,
        offsets,
        w_mean: weights.mean,
        w_cov: weights.cov,
    })
}

/// Time update: propagate each sigma point through `f`, recombine, add `q`.
pub fn unscented_predict<S, F>(
    belief: &GaussianBelief<S>,
    f: F,
    q: &DMatrix<f64>,
    params: &SigmaParams,
) -> Result<GaussianBelief<S>, UkfError>
where
    S: SigmaState,
    F: Fn(&S) -> S,
{
    let n = belief.dim();
    if q.nrows() != n || q.ncols() != n {
        return Err(UkfError::DimensionMismatch {
            expected: n,
            got: q.nrows(),
        });
    }
    let sigma = generate_sigma_points(belief, params)?;
    let propagated: Vec<S> = sigma.points.iter().map(&f).collect();
    let mean = S::weighted_mean(&propagated, &sigma.w_mean);

    let mut cov = q.clone();
    for (x, w) in propagated.iter().zip(&sigma.w_cov) {
        let d = mean.local(x);
        cov.ger(*w, &d, &d, 1.0);
    }
    Ok(GaussianBelief {
        mean,
        cov: symmetrize(&cov),
    })
}

/// Result of a measurement update.
#[derive(Debug, Clone)]
pub struct UpdateOutcome<S> {
    pub posterior: GaussianBelief<S>,
    pub innovation: DVector<f64>,
    pub predicted_measurement: DVector<f64>,
    pub innovation_cov: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    /// Normalized innovation squared, `v^T P_y^-1 v`.
    pub nis: f64,
}

/// Measurement update.
///
/// Sigma points are regenerated from `belief` (the predicted belief) and
/// projected through `h`; the predicted measurement, innovation covariance,
/// cross covariance, gain, innovation and posterior follow in that order.
pub fn unscented_update<S, H>(
    belief: &GaussianBelief<S>,
    h: H,
    r: &DMatrix<f64>,
    y: &DVector<f64>,
    params: &SigmaParams,
) -> Result<UpdateOutcome<S>, UkfError>
where
    S: SigmaState,
    H: Fn(&S) -> DVector<f64>,
{
    let m = y.len();
    if r.nrows() != m || r.ncols() != m {
        return Err(UkfError::DimensionMismatch {
            expected: m,
            got: r.nrows(),
        });
    }
    let n = belief.dim();
    let sigma = generate_sigma_points(belief, params)?;
    let projected: Vec<DVector<f64>> = sigma.points.iter().map(&h).collect();
    if let Some(bad) = projected.iter().find(|z| z.len() != m) {
        return Err(UkfError::DimensionMismatch {
            expected: m,
            got: bad.len(),
        });
    }
    let y_pred = DVector::weighted_mean(&projected, &sigma.w_mean);

    let mut p_y = r.clone();
    let mut p_xy = DMatrix::zeros(n, m);
    for ((z, dx), w) in projected.iter().zip(&sigma.offsets).zip(&sigma.w_cov) {
        let dz = z - &y_pred;
        p_y.ger(*w, &dz, &dz, 1.0);
        p_xy.ger(*w, dx, &dz, 1.0);
    }
    let p_y = symmetrize(&p_y);

    let chol = p_y
        .clone()
        .cholesky()
        .ok_or(UkfError::SingularInnovationCov { rcond: 0.0 })?;
    let rcond = cholesky_rcond(&chol.l());
    if !(rcond >= 1e-14) {
        return Err(UkfError::SingularInnovationCov { rcond });
    }

    // K = P_xy P_y^-1, solved as P_y K^T = P_xy^T.
    let gain = chol.solve(&p_xy.transpose()).transpose();
    let innovation = y - &y_pred;
    let nis = innovation.dot(&chol.solve(&innovation));

    let mean = belief.mean.retract(&(&gain * &innovation));
    let cov = symmetrize(&(&belief.cov - &gain * &p_y * gain.transpose()));

    Ok(UpdateOutcome {
        posterior: GaussianBelief { mean, cov },
        innovation,
        predicted_measurement: y_pred,
        innovation_cov: p_y,
        gain,
        nis,
    })
}

// Cheap reciprocal condition estimate from the Cholesky diagonal.
fn cholesky_rcond(l: &DMatrix<f64>) -> f64 {
    let d = l.diagonal();
    let max = d.amax();
    let min = d.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    if max == 0.0 {
        return 0.0;
    }
    (min / max).powi(2)
}

/// Largest absolute asymmetry `|P - P^T|`.
pub fn asymmetry(p: &DMatrix<f64>) -> f64 {
    (p - p.transpose()).amax()
}

/// Smallest eigenvalue of the symmetrized matrix.
pub fn min_eigenvalue(p: &DMatrix<f64>) -> f64 {
    symmetrize(p)
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, v| acc.min(*v))
}

/// Symmetric within `1e-12` and eigenvalues above `-1e-9`.
pub fn is_healthy_covariance(p: &DMatrix<f64>) -> bool {
    p.iter().all(|v| v.is_finite()) && asymmetry(p) <= 1e-12 && min_eigenvalue(p) >= -1e-9
}

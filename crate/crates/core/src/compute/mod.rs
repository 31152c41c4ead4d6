//! The iterative computation `X_{t+1} = f(X_t, θ_t)` and the builtin atomic operations.

pub mod classifier;
pub mod linalg;
mod state;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};

pub use self::classifier::{Classifier, ClassifierConfig, Dataset};
pub use self::linalg::Matrix;
use self::state::norm;
pub use self::state::{RandomDraw, SeedPath, StateVector, CLIENT_AGENT};
use crate::error::{Error, Result};

/// An atomic operation that peers can re-evaluate.
pub trait Computation {
    fn dimension(&self) -> usize;

    /// Whether `f` consumes external randomness.
    fn is_stochastic(&self) -> bool;

    /// Lipschitz constant in the state, when known.
    fn lipschitz(&self) -> Option<f64>;

    /// Draws `θ` for the given path; `None` for deterministic operations.
    fn draw(&self, path: SeedPath) -> Option<RandomDraw>;

    /// Evaluates `f(x, θ)` without argument checks. Use [`step`].
    fn apply(&self, x: &[f64], theta: Option<&RandomDraw>) -> Vec<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    /// `x ↦ A x + b`.
    Affine { matrix: Matrix, offset: Vec<f64> },
    /// Gradient descent on `½ xᵀQx`: `x ↦ x − η Q x`.
    QuadraticDescent { hessian: Matrix, rate: f64 },
    /// Mini-batch SGD on the bundled classifier; `θ` holds batch-selection uniforms.
    MiniBatchSgd(Arc<Classifier>),
    /// `x ↦ x + θ` with `θ ~ N(0, σ² I)`.
    GaussianDrift { dimension: usize, sigma: f64 },
}

/// A configured atomic operation together with its Lipschitz constant (analytic or estimated).
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicOpSpec {
    kind: OpKind,
    lipschitz: Option<f64>,
}

impl AtomicOpSpec {
    pub fn affine(matrix: Matrix, offset: Vec<f64>) -> Result<Self> {
        if matrix.rows() != matrix.cols() || matrix.rows() != offset.len() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                actual: offset.len(),
            });
        }
        let lipschitz = Some(matrix.spectral_norm());
        Ok(AtomicOpSpec {
            kind: OpKind::Affine { matrix, offset },
            lipschitz,
        })
    }

    /// Affine map whose linear part has the given singular values under random rotations.
    /// The stored `L` is exactly `max |s_i|`.
    pub fn affine_with_spectrum(singular: &[f64], offset: Vec<f64>, seed: u64) -> Result<Self> {
        let matrix = Matrix::with_singular_values(singular, seed);
        let l = singular.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        let mut op = Self::affine(matrix, offset)?;
        op.lipschitz = Some(l);
        Ok(op)
    }

    /// Gradient descent with rate `η` on a quadratic whose Hessian has the given eigenvalues.
    /// `L = max |1 − η λ_i|`.
    pub fn quadratic_descent(eigenvalues: &[f64], rate: f64, seed: u64) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(Error::InvalidParameter(format!("learning rate {rate}")));
        }
        let hessian = if eigenvalues.iter().all(|&l| l == eigenvalues[0]) {
            Matrix::scaled_identity(eigenvalues.len(), eigenvalues[0])
        } else {
            Matrix::symmetric_with_eigenvalues(eigenvalues, seed)
        };
        let l = eigenvalues
            .iter()
            .fold(0.0f64, |m, lam| m.max((1.0 - rate * lam).abs()));
        Ok(AtomicOpSpec {
            kind: OpKind::QuadraticDescent { hessian, rate },
            lipschitz: Some(l),
        })
    }

    /// Mini-batch SGD classifier. `L` is unknown until estimated.
    pub fn classifier(config: ClassifierConfig) -> Self {
        AtomicOpSpec {
            kind: OpKind::MiniBatchSgd(Arc::new(Classifier::new(config))),
            lipschitz: None,
        }
    }

    pub fn gaussian_drift(dimension: usize, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma {sigma}")));
        }
        Ok(AtomicOpSpec {
            kind: OpKind::GaussianDrift { dimension, sigma },
            lipschitz: Some(1.0),
        })
    }

    pub fn kind(&self) -> &OpKind {
        &self.kind
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    /// Fills in `L` from [`estimate_lipschitz`] when it is not already known.
    pub fn ensure_lipschitz(&mut self, samples: usize, radius: f64, seed: u64) -> Result<f64> {
        if let Some(l) = self.lipschitz {
            return Ok(l);
        }
        let l = estimate_lipschitz(self, samples, radius, seed)?;
        self.lipschitz = Some(l);
        Ok(l)
    }

    pub fn classifier_model(&self) -> Option<&Classifier> {
        match &self.kind {
            OpKind::MiniBatchSgd(c) => Some(c),
            _ => None,
        }
    }
}

impl Computation for AtomicOpSpec {
    fn dimension(&self) -> usize {
        match &self.kind {
            OpKind::Affine { offset, .. } => offset.len(),
            OpKind::QuadraticDescent { hessian, .. } => hessian.rows(),
            OpKind::MiniBatchSgd(c) => c.dimension(),
            OpKind::GaussianDrift { dimension, .. } => *dimension,
        }
    }

    fn is_stochastic(&self) -> bool {
        matches!(
            self.kind,
            OpKind::MiniBatchSgd(_) | OpKind::GaussianDrift { .. }
        )
    }

    fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    fn draw(&self, path: SeedPath) -> Option<RandomDraw> {
        let mut rng = path.rng();
        let values = match &self.kind {
            OpKind::MiniBatchSgd(c) => (0..c.config.batch_size)
                .map(|_| rng.random::<f64>())
                .collect(),
            OpKind::GaussianDrift { dimension, sigma } => {
                let normal = Normal::new(0.0, *sigma).expect("validated sigma");
                (0..*dimension).map(|_| rng.sample(normal)).collect()
            }
            _ => return None,
        };
        Some(RandomDraw {
            values,
            seed_path: path,
        })
    }

    fn apply(&self, x: &[f64], theta: Option<&RandomDraw>) -> Vec<f64> {
        match &self.kind {
            OpKind::Affine { matrix, offset } => matrix
                .mul_vec(x)
                .into_iter()
                .zip(offset)
                .map(|(a, b)| a + b)
                .collect(),
            OpKind::QuadraticDescent { hessian, rate } => x
                .iter()
                .zip(hessian.mul_vec(x))
                .map(|(xi, gi)| xi - rate * gi)
                .collect(),
            OpKind::MiniBatchSgd(c) => c.sgd_step(x, &theta.expect("checked by step").values),
            OpKind::GaussianDrift { .. } => x
                .iter()
                .zip(&theta.expect("checked by step").values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

/// Wraps a computation and counts every evaluation.
#[derive(Debug)]
pub struct Counting<C> {
    inner: C,
    count: AtomicU64,
}

impl<C> Counting<C> {
    pub fn new(inner: C) -> Self {
        Counting {
            inner,
            count: AtomicU64::new(0),
        }
    }

    pub fn evaluations(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }
}

impl<C: Computation> Computation for Counting<C> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }
    fn is_stochastic(&self) -> bool {
        self.inner.is_stochastic()
    }
    fn lipschitz(&self) -> Option<f64> {
        self.inner.lipschitz()
    }
    fn draw(&self, path: SeedPath) -> Option<RandomDraw> {
        self.inner.draw(path)
    }
    fn apply(&self, x: &[f64], theta: Option<&RandomDraw>) -> Vec<f64> {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.apply(x, theta)
    }
}

impl<C: Computation + ?Sized> Computation for &C {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn is_stochastic(&self) -> bool {
        (**self).is_stochastic()
    }
    fn lipschitz(&self) -> Option<f64> {
        (**self).lipschitz()
    }
    fn draw(&self, path: SeedPath) -> Option<RandomDraw> {
        (**self).draw(path)
    }
    fn apply(&self, x: &[f64], theta: Option<&RandomDraw>) -> Vec<f64> {
        (**self).apply(x, theta)
    }
}

/// One application of the atomic operation, with argument and result checks.
pub fn step<C: Computation + ?Sized>(
    op: &C,
    x: &StateVector,
    theta: Option<&RandomDraw>,
) -> Result<StateVector> {
    if x.dim() != op.dimension() {
        return Err(Error::DimensionMismatch {
            expected: op.dimension(),
            actual: x.dim(),
        });
    }
    match (op.is_stochastic(), theta) {
        (true, None) => return Err(Error::Draw("required by a stochastic operation")),
        (false, Some(_)) => return Err(Error::Draw("given to a deterministic operation")),
        _ => {}
    }
    StateVector::new(op.apply(x.as_slice(), theta))
}

/// `f^k(x)`: `step` applied `k` times, consuming one draw per step for stochastic operations.
pub fn iterate_k<C: Computation + ?Sized>(
    op: &C,
    x: &StateVector,
    k: usize,
    thetas: Option<&[RandomDraw]>,
) -> Result<StateVector> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if let Some(th) = thetas {
        if th.len() != k {
            return Err(Error::InvalidParameter(format!(
                "{} draws for {k} steps",
                th.len()
            )));
        }
    }
    let mut cur = x.clone();
    for i in 0..k {
        cur = step(op, &cur, thetas.map(|t| &t[i]))?;
    }
    Ok(cur)
}

/// Agent id reserved for Lipschitz probing draws.
const PROBE_AGENT: u64 = u64::MAX - 1;

/// Largest observed `‖f(x₁)−f(x₂)‖ / ‖x₁−x₂‖` over `sample_count` pairs drawn uniformly from the
/// ball of the given radius. Stochastic operations share one draw per pair. When the operation
/// has an analytic constant the estimate is capped by it.
pub fn estimate_lipschitz<C: Computation + ?Sized>(
    op: &C,
    sample_count: usize,
    radius: f64,
    rng_seed: u64,
) -> Result<f64> {
    if sample_count == 0 || !(radius > 0.0) {
        return Err(Error::InvalidParameter(
            "sample_count and radius must be positive".into(),
        ));
    }
    let d = op.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let ball_point = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&dir).max(f64::MIN_POSITIVE);
        let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
        dir.into_iter().map(|v| v * r / n).collect()
    };
    let mut best = 0.0f64;
    for i in 0..sample_count {
        let x1 = ball_point(&mut rng);
        let x2 = ball_point(&mut rng);
        let gap = x1
            .iter()
            .zip(&x2)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if gap == 0.0 {
            continue;
        }
        let theta = op.draw(SeedPath::new(rng_seed, PROBE_AGENT, i as u64));
        let y1 = op.apply(&x1, theta.as_ref());
        let y2 = op.apply(&x2, theta.as_ref());
        let out = y1
            .iter()
            .zip(&y2)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if out.is_finite() {
            best = best.max(out / gap);
        }
    }
    Ok(match op.lipschitz() {
        // rounding in the ratio can land one ulp above the analytic constant
        Some(l) => best.min(l),
        None => best,
    })
}

//! Validation of stochastic computations against the mean of `m` independent recomputations.

use super::config::RandomizedConfig;
use crate::compute::{step, Computation, SeedPath, StateVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedVerdict {
    pub valid: bool,
    /// `X̂ = (1/m) Σ f(X̃_t, θ_i)`.
    pub mean: StateVector,
    pub deviation: f64,
    /// Configured `λ̃`, or the top eigenvalue of the recomputations' sample covariance.
    pub lambda: f64,
    pub evaluations: u64,
}

/// Endorser ids `1..=m` recompute `f(prev, θ_i)` with their own draws for iteration `t`.
pub fn randomized_endorse<C: Computation + ?Sized>(
    op: &C,
    report: &StateVector,
    prev: &StateVector,
    t: u64,
    rcfg: &RandomizedConfig,
    run_seed: u64,
    attempt: u64,
) -> Result<RandomizedVerdict> {
    if rcfg.endorsers == 0 {
        return Err(Error::InvalidParameter("at least one endorser".into()));
    }
    let mut outs = Vec::with_capacity(rcfg.endorsers);
    for id in 1..=rcfg.endorsers as u64 {
        let theta = op.draw(SeedPath::new(run_seed, id, t).with_attempt(attempt));
        outs.push(step(op, prev, theta.as_ref())?);
    }
    let mean = StateVector::mean(&outs)?;
    let deviation = report.distance(&mean);
    let lambda = match rcfg.lambda {
        Some(l) => l,
        None => covariance_top_eigenvalue(&outs, &mean),
    };
    Ok(RandomizedVerdict {
        valid: deviation <= rcfg.margin,
        mean,
        deviation,
        lambda,
        evaluations: outs.len() as u64,
    })
}

const POWER_ITERATIONS: usize = 50;
const POWER_TOLERANCE: f64 = 1e-9;

/// Largest eigenvalue of the unbiased sample covariance, by power iteration without forming the
/// `d × d` matrix. Zero for fewer than two samples.
pub fn covariance_top_eigenvalue(samples: &[StateVector], mean: &StateVector) -> f64 {
    let m = samples.len();
    if m < 2 {
        return 0.0;
    }
    let d = mean.dim();
    let centered: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            s.as_slice()
                .iter()
                .zip(mean.as_slice())
                .map(|(a, b)| a - b)
                .collect()
        })
        .collect();
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; d];
        for c in &centered {
            let p: f64 = c.iter().zip(v).map(|(a, b)| a * b).sum();
            out.iter_mut().zip(c).for_each(|(o, ci)| *o += p * ci);
        }
        out.iter_mut().for_each(|o| *o /= (m - 1) as f64);
        out
    };
    // start from the sum of centered samples' absolute values to avoid an orthogonal start
    let mut v: Vec<f64> = (0..d)
        .map(|i| centered.iter().map(|c| c[i].abs()).sum::<f64>() + 1e-12)
        .collect();
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= n);
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = apply(&v);
        let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let done = (norm - lambda).abs() <= POWER_TOLERANCE * norm;
        lambda = norm;
        v = w.into_iter().map(|a| a / norm).collect();
        if done {
            break;
        }
    }
    lambda
}

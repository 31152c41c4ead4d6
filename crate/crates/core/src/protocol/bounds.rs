//! Closed-form guarantees used to size the protocol.

use crate::error::{Error, Result};

/// Largest quantization error for which an honest client is never invalidated: `Δ_val / (L + 1)`.
pub fn max_quantizer_error(tolerance: f64, lipschitz: f64) -> f64 {
    tolerance / (lipschitz + 1.0)
}

/// Smallest error guaranteed to be caught: `Δ_val + L ε`.
pub fn detection_threshold(tolerance: f64, lipschitz: f64, max_error: f64) -> f64 {
    tolerance + lipschitz * max_error
}

/// Lower bound on the number of updates in a frame whose first step has magnitude `δ`:
/// `min{(ln(Δ_quant − ε) − ln δ) / ln L, M̄}`. Only meaningful for `L > 1`; otherwise `M̄`.
pub fn frame_size_lower_bound(
    lipschitz: f64,
    quant_radius: f64,
    max_error: f64,
    first_step: f64,
    frame_cap: usize,
) -> f64 {
    let cap = frame_cap as f64;
    if lipschitz <= 1.0 || first_step <= 0.0 {
        return cap;
    }
    let b = ((quant_radius - max_error).ln() - first_step.ln()) / lipschitz.ln();
    b.min(cap)
}

/// Worst-case verification deviation after `K` recomputed iterates: `(L^K + 1) K ε`.
pub fn verification_bound(lipschitz: f64, period: u64, max_error: f64) -> f64 {
    (lipschitz.powf(period as f64) + 1.0) * period as f64 * max_error
}

/// Probability that an honest report deviates from the mean of `m` recomputations by more than
/// `Δ_marg`: `2dλ̃² / (Δ_marg − (L+1)ε)² · (1 + 1/(mλ̃))²`, clamped to `[0, 1]`.
pub fn deviation_probability_bound(
    d: usize,
    lambda: f64,
    margin: f64,
    lipschitz: f64,
    max_error: f64,
    m: usize,
) -> Result<f64> {
    let gap = margin - (lipschitz + 1.0) * max_error;
    if !(gap > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "margin {margin} must exceed (L+1)ε = {}",
            (lipschitz + 1.0) * max_error
        )));
    }
    if !(lambda > 0.0) || m == 0 {
        return Err(Error::InvalidParameter(
            "need λ̃ > 0 and at least one endorser".into(),
        ));
    }
    let tail = 1.0 + 1.0 / (m as f64 * lambda);
    let v = 2.0 * d as f64 * lambda * lambda / (gap * gap) * tail * tail;
    Ok(v.clamp(0.0, 1.0))
}

/// Endorsers sufficient for outlier probability `ρ`: `ceil(1 / (√(ρ/2d)(Δ_marg − (L+1)ε) − λ̃))`.
pub fn required_endorsers(
    rho: f64,
    d: usize,
    margin: f64,
    lipschitz: f64,
    max_error: f64,
    lambda: f64,
) -> Result<usize> {
    let gap = margin - (lipschitz + 1.0) * max_error;
    if !(gap > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "margin {margin} must exceed (L+1)ε"
        )));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "outlier probability {rho}"
        )));
    }
    let limit = 2.0 * d as f64 / (gap * gap);
    if rho > limit {
        return Err(Error::InvalidParameter(format!(
            "outlier probability {rho} above 2d/(Δ_marg − (L+1)ε)² = {limit}"
        )));
    }
    let bracket = (rho / (2.0 * d as f64)).sqrt() * gap - lambda;
    if !(bracket > 0.0) {
        return Err(Error::Infeasible(format!(
            "λ̃ = {lambda} leaves no positive margin ({bracket})"
        )));
    }
    let raw = 1.0 / bracket;
    // absorb rounding when the formula lands on an integer
    let m = (raw * (1.0 - 1e-12)).ceil().max(1.0);
    if m > usize::MAX as f64 {
        return Err(Error::Infeasible(format!("{raw} endorsers")));
    }
    Ok(m as usize)
}

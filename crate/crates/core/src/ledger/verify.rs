//! Post-hoc verification of a chain by recomputing `f^K` between stored states.

use super::audit::{AuditKind, Payload};
use super::chain::AuditChain;
use crate::codec::{CheckpointDictionary, LatticeQuantizer, Reconstructor};
use crate::compute::{iterate_k, Computation, StateVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AuditCheck {
    pub height: u64,
    pub t_start: u64,
    pub t_end: u64,
    /// `‖Ŷ − Ỹ‖`; `None` for the first stored state, which has nothing to recompute from.
    pub deviation: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub checks: Vec<AuditCheck>,
    pub max_deviation: f64,
    pub failures: usize,
    pub evaluations: u64,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Replays the stored states `Ỹ_τ` in order and checks `‖f^{span}(Ỹ_{τ−1}) − Ỹ_τ‖ ≤ Δ_ver`.
pub fn verify_computation<C: Computation + ?Sized>(
    chain: &AuditChain,
    op: &C,
    q: &LatticeQuantizer,
    verify_tolerance: f64,
) -> Result<VerificationReport> {
    if op.is_stochastic() {
        return Err(Error::NotVerifiable(
            "audits of stochastic computations cannot be replayed".into(),
        ));
    }
    let d = op.dimension();
    let mut dict = CheckpointDictionary::new(*q, q.clamp_radius() * 2.0)?;
    let mut report = VerificationReport {
        checks: Vec::new(),
        max_deviation: 0.0,
        failures: 0,
        evaluations: 0,
    };
    let mut prev: Option<(u64, StateVector)> = None;
    let mut recon: Option<Reconstructor> = None;
    for block in chain.blocks() {
        let height = block.header.height;
        let payload = Payload::decode(&block.payload, d)
            .map_err(|e| Error::Decode(format!("block {height}: {e}")))?;
        for audit in payload.audits() {
            let state = match &audit.kind {
                AuditKind::Checkpoint(code) => {
                    if matches!(payload, Payload::Frame { .. }) {
                        dict.absorb(code);
                    }
                    let s = dict
                        .resolve(code)
                        .map_err(|e| Error::Decode(format!("block {height}: {e}")))?;
                    recon = Some(Reconstructor::new(s.clone()));
                    s
                }
                AuditKind::Cumulative(u) => recon
                    .as_mut()
                    .ok_or_else(|| {
                        Error::Decode(format!("block {height}: update before any checkpoint"))
                    })?
                    .advance(q, u)?,
            };
            let deviation = match &prev {
                Some((t_prev, y_prev)) => {
                    if audit.t_end <= *t_prev {
                        return Err(Error::Decode(format!(
                            "block {height}: audit at {} does not follow {t_prev}",
                            audit.t_end
                        )));
                    }
                    let span = audit.t_end - t_prev;
                    let y_hat = iterate_k(op, y_prev, span as usize, None)?;
                    report.evaluations += span;
                    Some(y_hat.distance(&state))
                }
                None => None,
            };
            let passed = deviation.is_none_or(|v| v <= verify_tolerance);
            if let Some(v) = deviation {
                report.max_deviation = report.max_deviation.max(v);
            }
            if !passed {
                report.failures += 1;
            }
            report.checks.push(AuditCheck {
                height,
                t_start: audit.t_start,
                t_end: audit.t_end,
                deviation,
                passed,
            });
            prev = Some((audit.t_end, state));
        }
    }
    Ok(report)
}

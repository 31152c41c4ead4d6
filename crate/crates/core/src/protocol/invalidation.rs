//! Client response to an invalidation notice.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvalidationNotice {
    pub frame_index: u64,
    pub offset: usize,
    pub deviation: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InvalidationAction {
    SendRefinement,
    RecomputeAndResend,
}

/// Exchange rate between communication and computation used to pick the cheaper fix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementPolicy {
    pub max_level: u32,
    /// Price of one atomic evaluation expressed in transmitted bits.
    pub bits_per_atomic_op: f64,
}

impl Default for RefinementPolicy {
    fn default() -> Self {
        RefinementPolicy {
            max_level: 6,
            bits_per_atomic_op: 64.0,
        }
    }
}

/// What the invalidated update currently looks like and what redoing it would cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvalidationContext {
    pub level: u32,
    pub dimension: usize,
    pub lipschitz: f64,
    pub max_error: f64,
    pub recompute_ops: u64,
}

/// Refine when quantization can explain the deviation (`≤ (L+1)ε/2^level`), a finer level is
/// available and a chunk costs fewer bits than redoing the work; otherwise recompute.
pub fn handle_invalidation(
    notice: &InvalidationNotice,
    ctx: &InvalidationContext,
    policy: &RefinementPolicy,
) -> InvalidationAction {
    if ctx.level >= policy.max_level {
        return InvalidationAction::RecomputeAndResend;
    }
    let effective = ctx.max_error * 0.5f64.powi(ctx.level as i32);
    let explainable = notice.deviation <= (ctx.lipschitz + 1.0) * effective;
    let chunk_bits = 2.0 * ctx.dimension as f64;
    let recompute_bits = ctx.recompute_ops as f64 * policy.bits_per_atomic_op;
    if explainable && chunk_bits < recompute_bits {
        InvalidationAction::SendRefinement
    } else {
        InvalidationAction::RecomputeAndResend
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(level: u32) -> InvalidationContext {
        InvalidationContext {
            level,
            dimension: 4,
            lipschitz: 1.0,
            max_error: 0.1,
            recompute_ops: 1,
        }
    }

    fn notice(deviation: f64) -> InvalidationNotice {
        InvalidationNotice {
            frame_index: 0,
            offset: 2,
            deviation,
            tolerance: 0.15,
        }
    }

    #[test]
    fn rule_examples() {
        let p = RefinementPolicy::default();
        assert_eq!(
            handle_invalidation(&notice(0.9 * 0.2), &ctx(0), &p),
            InvalidationAction::SendRefinement
        );
        assert_eq!(
            handle_invalidation(&notice(1.5), &ctx(0), &p),
            InvalidationAction::RecomputeAndResend
        );
        assert_eq!(
            handle_invalidation(&notice(1e-6), &ctx(6), &p),
            InvalidationAction::RecomputeAndResend
        );
        let pricey = RefinementPolicy {
            bits_per_atomic_op: 4.0,
            ..p
        };
        assert_eq!(
            handle_invalidation(&notice(0.1), &ctx(0), &pricey),
            InvalidationAction::RecomputeAndResend
        );
    }
}

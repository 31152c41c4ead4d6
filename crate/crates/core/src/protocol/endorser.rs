//! Validation of reported states by recomputation.

use serde::{Deserialize, Serialize};

use super::config::{ToleranceSchedule, ValidationConfig};
use crate::codec::{Bitstream, CheckpointDictionary, Frame, LatticeQuantizer};
use crate::compute::{step, Computation, StateVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Valid,
    /// First state (0-based, after the anchor) whose deviation exceeded the tolerance.
    Invalid {
        offset: usize,
        decode_failure: bool,
    },
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endorsement {
    pub frame_index: u64,
    pub verdict: Verdict,
    /// `‖X̃_t − f(X̃_{t−1})‖` for every state checked.
    pub deviations: Vec<f64>,
    pub endorser_id: u64,
    pub recompute_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryCheck {
    pub verdict: Verdict,
    pub deviations: Vec<f64>,
    pub evaluations: u64,
}

fn require_deterministic<C: Computation + ?Sized>(op: &C) -> Result<()> {
    if op.is_stochastic() {
        return Err(Error::NotVerifiable(
            "stochastic operations are validated with randomized endorsement".into(),
        ));
    }
    Ok(())
}

/// Checks `reported[j]` (the state at `start_time + 1 + j`) against `f` of its predecessor,
/// starting from `anchor`. Stops at the first deviation above the tolerance.
pub fn validate_trajectory<C: Computation + ?Sized>(
    op: &C,
    anchor: &StateVector,
    reported: &[StateVector],
    start_time: u64,
    tolerance: &ToleranceSchedule,
) -> Result<TrajectoryCheck> {
    require_deterministic(op)?;
    let mut deviations = Vec::with_capacity(reported.len());
    let mut prev = anchor;
    for (j, x) in reported.iter().enumerate() {
        let expected = step(op, prev, None)?;
        let dev = x.distance(&expected);
        deviations.push(dev);
        if dev > tolerance.at(start_time + 1 + j as u64) {
            return Ok(TrajectoryCheck {
                verdict: Verdict::Invalid {
                    offset: j,
                    decode_failure: false,
                },
                deviations,
                evaluations: j as u64 + 1,
            });
        }
        prev = x;
    }
    Ok(TrajectoryCheck {
        verdict: Verdict::Valid,
        evaluations: reported.len() as u64,
        deviations,
    })
}

/// Validates the updates of a decoded frame from its checkpoint.
pub fn endorse_frame<C: Computation + ?Sized>(
    frame: &Frame,
    checkpoint: &StateVector,
    op: &C,
    q: &LatticeQuantizer,
    cfg: &ValidationConfig,
    endorser_id: u64,
) -> Result<Endorsement> {
    let states = frame.reported_states(q, checkpoint)?;
    let check = validate_trajectory(
        op,
        &states[0],
        &states[1..],
        frame.checkpoint_time(),
        &cfg.tolerance,
    )?;
    Ok(Endorsement {
        frame_index: frame.index(),
        verdict: check.verdict,
        deviations: check.deviations,
        endorser_id,
        recompute_count: check.evaluations,
    })
}

/// Decodes and validates a frame as received on the wire. Undecodable frames, including ones
/// citing an unknown dictionary entry, are rejected at offset 0.
#[allow(clippy::too_many_arguments)]
pub fn endorse_bitstream<C: Computation + ?Sized>(
    bits: &Bitstream,
    expected_index: u64,
    checkpoint_time: u64,
    dictionary: &CheckpointDictionary,
    op: &C,
    q: &LatticeQuantizer,
    cfg: &ValidationConfig,
    endorser_id: u64,
) -> Result<Endorsement> {
    require_deterministic(op)?;
    let decoded = Frame::decode(bits, q, checkpoint_time).and_then(|f| {
        if f.index() != expected_index {
            return Err(Error::Decode(format!(
                "frame index {} where {expected_index} was expected",
                f.index()
            )));
        }
        let cp = dictionary.resolve(f.checkpoint())?;
        Ok((f, cp))
    });
    match decoded {
        Ok((frame, cp)) => endorse_frame(&frame, &cp, op, q, cfg, endorser_id),
        Err(_) => Ok(Endorsement {
            frame_index: expected_index,
            verdict: Verdict::Invalid {
                offset: 0,
                decode_failure: true,
            },
            deviations: Vec::new(),
            endorser_id,
            recompute_count: 0,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::CheckpointCode;
    use crate::compute::{AtomicOpSpec, Matrix};
    use crate::protocol::client::client_run_frames;

    fn op() -> AtomicOpSpec {
        AtomicOpSpec::affine(Matrix::scaled_identity(2, 0.5), vec![1.0, 0.0]).unwrap()
    }

    #[test]
    fn honest_frames_are_valid() {
        let cfg = ValidationConfig {
            frame_cap: 8,
            ..ValidationConfig::for_tolerance(0.3, 0.5)
        };
        let run = client_run_frames(
            &op(),
            &StateVector::new(vec![3.0, -2.0]).unwrap(),
            40,
            &cfg,
            0,
        )
        .unwrap();
        for f in &run.frames {
            let cp = run.dictionary.resolve(f.checkpoint()).unwrap();
            let e = endorse_frame(f, &cp, &op(), &run.quantizer, &cfg, 1).unwrap();
            assert!(e.verdict.is_valid());
            assert_eq!(e.recompute_count, f.len() as u64);
            assert!(e
                .deviations
                .iter()
                .all(|d| *d <= 1.5 * cfg.max_error + 1e-12));
        }
    }

    #[test]
    fn zero_length_frame_is_valid_without_work() {
        let cfg = ValidationConfig::for_tolerance(0.3, 0.5);
        let q = cfg.quantizer(2).unwrap();
        let cp = StateVector::new(vec![1.0, 1.0]).unwrap();
        let mut f = Frame::new(0, CheckpointCode::NewEntry(cp.clone()), 0);
        f.seal();
        let e = endorse_frame(&f, &cp, &op(), &q, &cfg, 1).unwrap();
        assert_eq!(e.verdict, Verdict::Valid);
        assert_eq!(e.recompute_count, 0);
    }

    #[test]
    fn injected_error_is_caught_at_its_offset() {
        let tol = ToleranceSchedule::Constant(0.1);
        let anchor = StateVector::new(vec![0.0, 0.0]).unwrap();
        let mut states = Vec::new();
        let mut x = anchor.clone();
        for _ in 0..6 {
            x = step(&op(), &x, None).unwrap();
            states.push(x.clone());
        }
        states[3] = states[3]
            .add(&StateVector::new(vec![0.0, 0.11]).unwrap())
            .unwrap();
        let c = validate_trajectory(&op(), &anchor, &states, 0, &tol).unwrap();
        assert_eq!(
            c.verdict,
            Verdict::Invalid {
                offset: 3,
                decode_failure: false
            }
        );
        assert_eq!(c.evaluations, 4);
    }

    #[test]
    fn tolerance_is_closed() {
        let o = AtomicOpSpec::affine(Matrix::identity(1), vec![0.0]).unwrap();
        let anchor = StateVector::new(vec![0.0]).unwrap();
        let reported = [StateVector::new(vec![0.25]).unwrap()];
        let c = validate_trajectory(
            &o,
            &anchor,
            &reported,
            0,
            &ToleranceSchedule::Constant(0.25),
        )
        .unwrap();
        assert!(c.verdict.is_valid());
    }

    #[test]
    fn garbage_bitstream_is_rejected() {
        let cfg = ValidationConfig::for_tolerance(0.3, 0.5);
        let q = cfg.quantizer(2).unwrap();
        let dict = CheckpointDictionary::new(q, 100.0).unwrap();
        let bits = Bitstream {
            bytes: vec![1, 2, 3],
            bit_len: 24,
        };
        let e = endorse_bitstream(&bits, 4, 0, &dict, &op(), &q, &cfg, 2).unwrap();
        assert_eq!(
            e.verdict,
            Verdict::Invalid {
                offset: 0,
                decode_failure: true
            }
        );
    }
}

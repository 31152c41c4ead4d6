//! State-by-state randomized validation of a (possibly stochastic) computation: the client reports
//! each state, `m` endorsers compare it with the mean of their own recomputations, and rejected
//! steps are redrawn.

use crate::codec::{
    header_bits, CheckpointCode, CheckpointDictionary, Frame, LatticeQuantizer, QuantizedUpdate,
    Reconstructor, UpdateRef,
};
use crate::compute::{step, Computation, SeedPath, StateVector, CLIENT_AGENT};
use crate::error::Result;
use crate::ledger::{AuditChain, Payload, HEADER_BITS};
use crate::netsim::{CostLedger, Delivery, MessageKind, Network, NodeId, Role, CLIENT_NODE};
use crate::protocol::{
    handle_invalidation, randomized_endorse, InvalidationAction, InvalidationContext,
    InvalidationNotice, ProtocolMode,
};

use super::config::ResolvedRun;

const NOTICE_BITS: u64 = 192;

#[derive(Debug)]
pub struct ExperimentRun {
    pub mode: ProtocolMode,
    pub costs: CostLedger,
    pub chain: AuditChain,
    pub final_state: StateVector,
    /// Test accuracy of the client's final model, for classifier runs.
    pub accuracy: Option<f64>,
    /// Iterations where the client gave up redrawing and took the endorsers' mean.
    pub adopted: u64,
    pub trace: Vec<Delivery>,
}

/// Client-side coding state for the compressed modes.
struct Coder {
    q: LatticeQuantizer,
    dict: CheckpointDictionary,
    frames: Vec<Frame>,
    frame: Frame,
    recon: Reconstructor,
    frame_cap: usize,
}

/// One tentatively coded report.
struct Coded {
    reported: StateVector,
    bits: u64,
    kind: CodedKind,
}

enum CodedKind {
    Raw,
    Checkpoint {
        code: CheckpointCode,
        dict: CheckpointDictionary,
    },
    Update {
        update: QuantizedUpdate,
        delta: StateVector,
        before: Reconstructor,
        after: Reconstructor,
    },
}

impl Coder {
    fn code(&self, mode: ProtocolMode, x: &StateVector) -> Result<Coded> {
        let q = &self.q;
        let d = q.dimension() as u64;
        if mode == ProtocolMode::Transaction {
            return Ok(Coded {
                reported: x.clone(),
                bits: 64 * d,
                kind: CodedKind::Raw,
            });
        }
        let delta = x.sub(&self.recon.current(q))?;
        if delta.norm() > q.clamp_radius() || self.frame.len() >= self.frame_cap {
            let mut dict = self.dict.clone();
            let code = dict.encode(x)?;
            let reported = dict.resolve(&code)?;
            let bits = match mode {
                ProtocolMode::Batch => header_bits(q, &code),
                _ => {
                    8 + match code {
                        CheckpointCode::DictIndex(_) => 64,
                        CheckpointCode::NewEntry(_) => 64 * d,
                    }
                }
            };
            return Ok(Coded {
                reported,
                bits,
                kind: CodedKind::Checkpoint { code, dict },
            });
        }
        let update = q.quantize(&delta)?;
        let mut after = self.recon.clone();
        let reported = after.advance(q, &update)?;
        Ok(Coded {
            reported,
            bits: q.update_bit_cost(),
            kind: CodedKind::Update {
                update,
                delta,
                before: self.recon.clone(),
                after,
            },
        })
    }

    /// Commits a coded report; returns the frame that was closed by a new checkpoint, if any.
    fn commit(&mut self, coded: Coded, t: u64) -> Result<Option<Frame>> {
        match coded.kind {
            CodedKind::Raw => Ok(None),
            CodedKind::Checkpoint { code, dict } => {
                self.dict = dict;
                self.recon = Reconstructor::new(coded.reported);
                let index = self.frames.len() as u64 + 1;
                let mut done = std::mem::replace(&mut self.frame, Frame::new(index, code, t));
                done.seal();
                self.frames.push(done.clone());
                Ok(Some(done))
            }
            CodedKind::Update { update, after, .. } => {
                self.recon = after;
                self.frame.push_update(update)?;
                Ok(None)
            }
        }
    }
}

struct Accounting {
    net: Network<()>,
    clock: u64,
    endorsers: Vec<NodeId>,
}

impl Accounting {
    fn multicast(&mut self, costs: &mut CostLedger, kind: MessageKind, bits: u64) {
        for &to in &self.endorsers {
            self.net
                .send(costs, self.clock, CLIENT_NODE, to, kind, bits, ());
        }
        self.drain(costs);
    }

    fn notices(&mut self, costs: &mut CostLedger) {
        for &from in &self.endorsers {
            self.net.send(
                costs,
                self.clock,
                from,
                CLIENT_NODE,
                MessageKind::InvalidationNotice,
                NOTICE_BITS,
                (),
            );
        }
        self.drain(costs);
    }

    fn drain(&mut self, costs: &mut CostLedger) {
        while self.net.deliver(costs).is_some() {}
        self.clock += 1;
    }
}

fn store(chain: &mut AuditChain, costs: &mut CostLedger, payload: Payload) -> Result<()> {
    let height = chain.len() as u64;
    let block = chain.append(height, payload.encode())?;
    costs.record_storage(block.payload_bits(), HEADER_BITS);
    Ok(())
}

/// Runs the configured computation under per-state randomized validation.
pub fn run_validated(res: &ResolvedRun, mode: ProtocolMode) -> Result<ExperimentRun> {
    run_validated_with(&res.op, res, mode)
}

/// As [`run_validated`], evaluating `op` in place of the configured operation (for instance an
/// instrumented wrapper around it).
pub fn run_validated_with<C: Computation + ?Sized>(
    op: &C,
    res: &ResolvedRun,
    mode: ProtocolMode,
) -> Result<ExperimentRun> {
    let d = op.dimension();
    let cfg = &res.validation;
    let rcfg = &res.randomized;
    let q = cfg.quantizer(d)?;
    let period = res.session.period;
    let mut costs = CostLedger::new();
    let mut chain = AuditChain::new();
    let m = rcfg.endorsers.max(1);
    let mut acct = Accounting {
        net: Network::new(res.session.meta_bits, CLIENT_NODE),
        clock: 0,
        endorsers: (1..=m as NodeId).collect(),
    };
    let compressed = mode != ProtocolMode::Transaction;

    let mut dict = CheckpointDictionary::new(q, cfg.state_bound)?;
    let code = if compressed {
        dict.encode(&res.x0)?
    } else {
        CheckpointCode::NewEntry(res.x0.clone())
    };
    let first = dict.resolve(&code).unwrap_or_else(|_| res.x0.clone());
    let mut coder = Coder {
        q,
        dict,
        frames: Vec::new(),
        frame: Frame::new(0, code.clone(), 0),
        recon: Reconstructor::new(first.clone()),
        frame_cap: cfg.frame_cap,
    };
    let initial_bits = match mode {
        ProtocolMode::Transaction => 64 * d as u64,
        ProtocolMode::Streaming => 8 + 64 * d as u64,
        ProtocolMode::Batch => header_bits(&q, &code),
    };
    acct.multicast(&mut costs, MessageKind::FrameReport, initial_bits);
    match mode {
        ProtocolMode::Transaction => store(
            &mut chain,
            &mut costs,
            Payload::Raw {
                t: 0,
                state: res.x0.clone(),
            },
        )?,
        ProtocolMode::Streaming => {
            store(&mut chain, &mut costs, checkpoint_payload(0, code, period))?
        }
        ProtocolMode::Batch => {}
    }
    if compressed {
        costs.record_codec(1);
    }

    let mut x = res.x0.clone();
    let mut reported = first;
    let mut adopted = 0;
    for t in 1..=res.iterations {
        let tol = res.margin.unwrap_or_else(|| cfg.tolerance.at(t));
        let verdict = randomized_endorse(op, &reported, &reported, t, rcfg, res.seed, 0)?;
        costs.record_atomic(Role::Endorser, verdict.evaluations);
        let mean = verdict.mean;
        let mut attempt = 0u64;
        let (next, coded) = loop {
            let theta = op.draw(SeedPath::new(res.seed, CLIENT_AGENT, t).with_attempt(attempt));
            let candidate = step(op, &x, theta.as_ref())?;
            costs.record_atomic(Role::Client, 1);
            if attempt > 0 {
                costs.record_recomputations(1);
            }
            let mut coded = coder.code(mode, &candidate)?;
            if compressed {
                costs.record_codec(1);
            }
            acct.multicast(&mut costs, MessageKind::FrameReport, coded.bits);
            let mut deviation = coded.reported.distance(&mean);
            if deviation <= tol {
                break (candidate, coded);
            }
            costs.record_invalidation();
            acct.notices(&mut costs);
            // refine while quantization can explain the miss and a chunk is cheaper than a redraw
            while deviation > tol {
                let CodedKind::Update {
                    update,
                    delta,
                    before,
                    ..
                } = &mut coded.kind
                else {
                    break;
                };
                let notice = InvalidationNotice {
                    frame_index: coder.frames.len() as u64,
                    offset: coder.frame.len(),
                    deviation,
                    tolerance: tol,
                };
                let ctx = InvalidationContext {
                    level: update.level,
                    dimension: d,
                    lipschitz: cfg.lipschitz,
                    max_error: cfg.max_error,
                    recompute_ops: 1,
                };
                if handle_invalidation(&notice, &ctx, &res.session.policy)
                    != InvalidationAction::SendRefinement
                {
                    break;
                }
                let target = UpdateRef {
                    frame_index: notice.frame_index,
                    offset: notice.offset,
                };
                let Ok(chunk) = q.refine(delta, update, target) else {
                    break;
                };
                *update = q.apply_refinement(update, &chunk)?;
                coded.reported = before.peek_refined(&q, update).unwrap_or(coded.reported);
                costs.record_refinement();
                costs.record_codec(1);
                acct.multicast(
                    &mut costs,
                    MessageKind::RefinementChunkMsg,
                    chunk.bit_cost(),
                );
                deviation = coded.reported.distance(&mean);
                if deviation > tol {
                    costs.record_invalidation();
                    acct.notices(&mut costs);
                }
            }
            if deviation <= tol {
                break (candidate, coded);
            }
            attempt += 1;
            if attempt > res.max_retries as u64 {
                adopted += 1;
                let coded = coder.code(mode, &mean)?;
                if compressed {
                    costs.record_codec(1);
                }
                acct.multicast(&mut costs, MessageKind::FrameReport, coded.bits);
                break (mean.clone(), coded);
            }
        };
        reported = coded.reported.clone();
        let stored = match (&coded.kind, mode) {
            (CodedKind::Raw, _) => Some(Payload::Raw {
                t,
                state: next.clone(),
            }),
            (CodedKind::Checkpoint { code, .. }, ProtocolMode::Streaming) => {
                Some(checkpoint_payload(t, code.clone(), period))
            }
            (CodedKind::Update { update, .. }, ProtocolMode::Streaming) => Some(Payload::Delta {
                t,
                indices: update.indices_at(0),
            }),
            _ => None,
        };
        if let Some(closed) = coder.commit(coded, t)? {
            if mode == ProtocolMode::Batch {
                store_frame(&mut chain, &mut costs, &closed, period)?;
            }
        }
        if let Some(p) = stored {
            store(&mut chain, &mut costs, p)?;
        }
        x = next;
    }
    if mode == ProtocolMode::Batch {
        let mut last = coder.frame.clone();
        last.seal();
        store_frame(&mut chain, &mut costs, &last, period)?;
    }
    costs.record_iterations(res.iterations);
    let accuracy = res
        .op
        .classifier_model()
        .map(|c| c.test_accuracy(x.as_slice()));
    Ok(ExperimentRun {
        mode,
        costs,
        chain,
        final_state: x,
        accuracy,
        adopted,
        trace: acct.net.into_trace(),
    })
}

fn checkpoint_payload(t: u64, code: CheckpointCode, period: u64) -> Payload {
    Payload::Frame {
        checkpoint_time: t,
        period,
        updates: 0,
        checkpoint: code,
        sums: Vec::new(),
    }
}

fn store_frame(
    chain: &mut AuditChain,
    costs: &mut CostLedger,
    frame: &Frame,
    period: u64,
) -> Result<()> {
    let payload = Payload::from_frame(frame, period)?;
    // one encode plus one operation per stored audit
    costs.record_codec(1 + payload.audits().len() as u64);
    store(chain, costs, payload)
}

/// Plain mini-batch SGD from the same seed, without validation.
pub fn vanilla_run<C: Computation + ?Sized>(
    op: &C,
    x0: &StateVector,
    iterations: u64,
    seed: u64,
) -> Result<StateVector> {
    let mut x = x0.clone();
    for t in 1..=iterations {
        let theta = op.draw(SeedPath::new(seed, CLIENT_AGENT, t));
        x = step(op, &x, theta.as_ref())?;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compute::{AtomicOpSpec, Counting};
    use crate::experiment::config::{RunConfig, Scenario};

    fn small_classifier(tol: f64) -> (RunConfig, ResolvedRun) {
        let text = format!(
            r#"
scenario = "custom"
iterations = 40
seed = 4
[computation]
kind = "classifier"
[computation.model]
train_size = 300
test_size = 100
[validation]
tolerance = {{ logarithmic = {{ max = {tol} }} }}
quant_radius = 2.0
max_error = 0.001
coarse_max_error = {tol}
"#
        );
        let cfg = RunConfig::from_toml(&text).unwrap();
        let r = cfg.resolve().unwrap();
        (cfg, r)
    }

    #[test]
    fn huge_tolerance_is_vanilla_sgd() {
        let (_, r) = small_classifier(1e9);
        for mode in ProtocolMode::ALL {
            let out = run_validated(&r, mode).unwrap();
            let plain = vanilla_run(&r.op, &r.x0, r.iterations, r.seed).unwrap();
            assert_eq!(out.final_state, plain, "{mode}");
            assert_eq!(out.costs.recomputations(), 0);
            assert_eq!(out.costs.invalidations(), 0);
        }
    }

    #[test]
    fn tiny_tolerance_exhausts_retries() {
        let (_, r) = small_classifier(1e-9);
        let out = run_validated(&r, ProtocolMode::Batch).unwrap();
        assert_eq!(out.adopted, r.iterations);
        assert_eq!(
            out.costs.recomputations(),
            r.iterations * r.max_retries as u64
        );
    }

    #[test]
    fn evaluations_are_counted_once() {
        let (_, r) = small_classifier(0.3);
        let counted = Counting::new(r.op.clone());
        let out = run_validated_with(&counted, &r, ProtocolMode::Streaming).unwrap();
        assert!(out.costs.recomputations() > 0);
        assert_eq!(out.costs.total_atomic_ops(), counted.evaluations());
        assert_eq!(
            out.costs.total_atomic_ops(),
            r.iterations * (1 + r.randomized.endorsers as u64) + out.costs.recomputations()
        );
        assert_eq!(out.costs.comm_bits(), out.costs.received_bits());
    }

    #[test]
    fn chains_hold_one_block_per_unit() {
        let (_, r) = small_classifier(1e9);
        let t = run_validated(&r, ProtocolMode::Transaction).unwrap();
        assert_eq!(t.chain.len() as u64, r.iterations + 1);
        let b = run_validated(&r, ProtocolMode::Batch).unwrap();
        assert!(b.chain.len() < t.chain.len());
        assert!(b.chain.verify_integrity(None).is_ok());
    }

    #[test]
    fn deterministic_ops_run_too() {
        let op = AtomicOpSpec::affine_with_spectrum(&[0.5, 0.7], vec![0.1, 0.0], 1).unwrap();
        let cfg = RunConfig::from_toml(
            r#"
iterations = 20
[computation]
kind = "affine"
singular_values = [0.5, 0.7]
offset = [0.1, 0.0]
matrix_seed = 1
[validation]
tolerance = { constant = 0.1 }
quant_radius = 0.5
"#,
        )
        .unwrap();
        let r = cfg.resolve_with(&op, Scenario::Base, 0.1, 0).unwrap();
        let out = run_validated(&r, ProtocolMode::Batch).unwrap();
        assert_eq!(out.costs.invalidations(), 0);
        assert!(out.accuracy.is_none());
    }
}

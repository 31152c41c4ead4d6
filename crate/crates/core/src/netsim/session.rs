//! One client, a pool of endorsers and an orderer exchanging messages over [`Network`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::cost::{CostLedger, ModeParams, Role};
use super::network::{Delivery, MessageKind, Network, NodeId};
use crate::codec::{
    Bitstream, CheckpointCode, CheckpointDictionary, Frame, LatticeQuantizer, QuantizedUpdate,
    Reconstructor, RefinementChunk, UpdateRef,
};
use crate::compute::{step, Computation, StateVector};
use crate::error::{Error, Result};
use crate::ledger::{AuditChain, AuditKind, Payload, HEADER_BITS};
use crate::protocol::{
    assign_endorsers, client_run_frames, handle_invalidation, validate_trajectory, ClientRun,
    Endorsement, InvalidationAction, InvalidationContext, InvalidationNotice, OrderingBuffer,
    ProtocolMode, RefinementPolicy, ValidationConfig, Verdict,
};

pub const CLIENT_NODE: NodeId = 0;

const VERDICT_BITS: u64 = 8;
const NOTICE_BITS: u64 = 192;
const COMMIT_BITS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub validation: ValidationConfig,
    /// Endorsers per unit, `Ē`.
    pub endorsers: usize,
    /// Size of the endorser pool; batch frames rotate through it.
    pub pool: usize,
    /// Subsampling period `K` for batch-mode blocks.
    pub period: u64,
    pub meta_bits: u64,
    pub policy: RefinementPolicy,
    pub run_seed: u64,
}

impl SessionConfig {
    pub fn new(validation: ValidationConfig) -> Self {
        SessionConfig {
            validation,
            endorsers: 3,
            pool: 6,
            period: 1,
            meta_bits: 256,
            policy: RefinementPolicy::default(),
            run_seed: 0,
        }
    }

    fn orderer(&self) -> NodeId {
        self.pool.max(1) as NodeId + 1
    }
}

#[derive(Debug)]
pub struct SessionOutcome {
    pub mode: ProtocolMode,
    pub run: ClientRun,
    pub chain: AuditChain,
    pub costs: CostLedger,
    pub trace: Vec<Delivery>,
    /// Final endorsements in arrival order at the orderer.
    pub endorsements: Vec<Endorsement>,
    /// Units committed to the chain (states, or frames in batch mode).
    pub committed: u64,
    pub units: u64,
    pub halted_at: Option<u64>,
}

impl SessionOutcome {
    pub fn completed(&self) -> bool {
        self.halted_at.is_none() && self.committed == self.units
    }

    /// Cost-model parameters matching this run, with `M̄` the mean frame length.
    pub fn mode_params(&self, cfg: &SessionConfig) -> ModeParams {
        let iterations = self.run.true_states.len().saturating_sub(1) as f64;
        let frames = self.run.frames.len().max(1) as f64;
        ModeParams {
            mode: self.mode,
            endorsers: cfg.endorsers.clamp(1, cfg.pool.max(1)) as f64,
            frame_size: (iterations / frames).max(1.0),
            period: cfg.period,
            dimension: self.run.quantizer.dimension(),
            state_bound: cfg.validation.state_bound,
            max_error: cfg.validation.max_error,
            quant_radius: cfg.validation.quant_radius,
            meta_bits: cfg.meta_bits as f64,
        }
    }
}

#[derive(Debug, Clone)]
enum Report {
    Raw {
        t: u64,
        state: StateVector,
    },
    Checkpoint {
        t: u64,
        code: CheckpointCode,
    },
    Delta {
        t: u64,
        update: QuantizedUpdate,
    },
    Frame {
        index: u64,
        checkpoint_time: u64,
        bits: Bitstream,
    },
}

#[derive(Debug, Clone)]
enum Fix {
    Refine(RefinementChunk),
    Raw(StateVector),
}

#[derive(Debug, Clone)]
enum Body {
    Report(Report),
    Endorse(Endorsement, Option<Vec<u8>>),
    Notice { notice: InvalidationNotice, t: u64 },
    Fix { unit: u64, offset: usize, fix: Fix },
    Commit(u64),
}

/// What the endorsers know from committed blocks.
#[derive(Debug)]
struct LedgerView {
    dictionary: CheckpointDictionary,
    /// Last stored state of each committed batch frame.
    last_states: Vec<StateVector>,
}

impl LedgerView {
    fn absorb(&mut self, q: &LatticeQuantizer, payload: &Payload) -> Result<()> {
        let mut recon: Option<Reconstructor> = None;
        let mut last = None;
        for audit in payload.audits() {
            match &audit.kind {
                AuditKind::Checkpoint(code) => {
                    self.dictionary.absorb(code);
                    let s = self.dictionary.resolve(code)?;
                    recon = Some(Reconstructor::new(s.clone()));
                    last = Some(s);
                }
                AuditKind::Cumulative(u) => {
                    let r = recon
                        .as_mut()
                        .ok_or_else(|| Error::Decode("update before checkpoint".into()))?;
                    last = Some(r.advance(q, u)?);
                }
            }
        }
        if let Some(s) = last {
            self.last_states.push(s);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Slot {
    state: StateVector,
    /// Reconstruction before this state and the update currently applied to it.
    update: Option<(Reconstructor, QuantizedUpdate)>,
    raw: bool,
}

#[derive(Debug)]
struct Active {
    unit: u64,
    first_time: u64,
    anchor: Option<StateVector>,
    slots: Vec<Slot>,
    deviations: Vec<f64>,
    evaluations: u64,
    payload: Option<Vec<u8>>,
}

impl Active {
    fn anchor_for(&self, offset: usize) -> Option<&StateVector> {
        if offset == 0 {
            self.anchor.as_ref()
        } else {
            Some(&self.slots[offset - 1].state)
        }
    }
}

#[derive(Debug)]
struct EndorserNode {
    id: NodeId,
    lead_of: BTreeSet<u64>,
    inbox: BTreeMap<u64, Report>,
    active: Option<Active>,
    /// Streaming and transaction state carried between units.
    dictionary: CheckpointDictionary,
    recon: Option<Reconstructor>,
    last: Option<StateVector>,
}

enum Step {
    Done(Verdict),
    Waiting,
}

struct Ctx<'a, C: ?Sized> {
    op: &'a C,
    q: LatticeQuantizer,
    cfg: &'a SessionConfig,
    mode: ProtocolMode,
    orderer: NodeId,
    clock: u64,
}

impl EndorserNode {
    fn start<C: Computation + ?Sized>(
        &mut self,
        ctx: &Ctx<'_, C>,
        ledger: &LedgerView,
        unit: u64,
        report: Report,
    ) -> Result<std::result::Result<Active, Endorsement>> {
        let q = &ctx.q;
        let period = ctx.cfg.period;
        let reject = |unit| Endorsement {
            frame_index: unit,
            verdict: Verdict::Invalid {
                offset: 0,
                decode_failure: true,
            },
            deviations: Vec::new(),
            endorser_id: self.id,
            recompute_count: 0,
        };
        let mut active = Active {
            unit,
            first_time: 0,
            anchor: self.last.clone(),
            slots: Vec::new(),
            deviations: Vec::new(),
            evaluations: 0,
            payload: None,
        };
        match report {
            Report::Raw { t, state } => {
                active.first_time = t;
                active.payload = Some(
                    Payload::Raw {
                        t,
                        state: state.clone(),
                    }
                    .encode(),
                );
                active.slots.push(Slot {
                    state,
                    update: None,
                    raw: true,
                });
            }
            Report::Checkpoint { t, code } => {
                self.dictionary.absorb(&code);
                let Ok(state) = self.dictionary.resolve(&code) else {
                    return Ok(Err(reject(unit)));
                };
                self.recon = Some(Reconstructor::new(state.clone()));
                active.first_time = t;
                active.payload = Some(
                    Payload::Frame {
                        checkpoint_time: t,
                        period,
                        updates: 0,
                        checkpoint: code,
                        sums: Vec::new(),
                    }
                    .encode(),
                );
                active.slots.push(Slot {
                    state,
                    update: None,
                    raw: false,
                });
            }
            Report::Delta { t, update } => {
                let Some(recon) = self.recon.as_mut() else {
                    return Ok(Err(reject(unit)));
                };
                let before = recon.clone();
                let state = recon.advance(q, &update)?;
                active.first_time = t;
                active.payload = Some(
                    Payload::Delta {
                        t,
                        indices: update.indices.clone(),
                    }
                    .encode(),
                );
                active.slots.push(Slot {
                    state,
                    update: Some((before, update)),
                    raw: false,
                });
            }
            Report::Frame {
                index,
                checkpoint_time,
                bits,
            } => {
                let decoded = Frame::decode(&bits, q, checkpoint_time).and_then(|f| {
                    if f.index() != index {
                        return Err(Error::Decode(format!(
                            "frame {} sent as {index}",
                            f.index()
                        )));
                    }
                    let cp = ledger.dictionary.resolve(f.checkpoint())?;
                    Ok((f, cp))
                });
                let Ok((frame, cp)) = decoded else {
                    return Ok(Err(reject(unit)));
                };
                active.first_time = checkpoint_time;
                active.anchor = index
                    .checked_sub(1)
                    .and_then(|p| ledger.last_states.get(p as usize).cloned());
                active.payload = Some(Payload::from_frame(&frame, period)?.encode());
                let mut recon = Reconstructor::new(cp.clone());
                active.slots.push(Slot {
                    state: cp,
                    update: None,
                    raw: false,
                });
                for u in frame.updates() {
                    let before = recon.clone();
                    let state = recon.advance(q, u)?;
                    active.slots.push(Slot {
                        state,
                        update: Some((before, u.clone())),
                        raw: false,
                    });
                }
            }
        }
        Ok(Ok(active))
    }

    /// Validates the active unit from `offset` on. Failures are reported to the client unless the
    /// state was already resent in full.
    fn check_from<C: Computation + ?Sized>(
        &mut self,
        ctx: &Ctx<'_, C>,
        net: &mut Network<Body>,
        costs: &mut CostLedger,
        offset: usize,
    ) -> Result<Step> {
        let a = self.active.as_mut().expect("active unit");
        let (start, anchor) = match a.anchor_for(offset) {
            Some(anchor) => (offset, anchor.clone()),
            // nothing precedes the first state of the run
            None => (offset + 1, a.slots[offset].state.clone()),
        };
        a.deviations.truncate(offset);
        if start > offset {
            a.deviations.push(0.0);
        }
        let states: Vec<StateVector> = a.slots[start..].iter().map(|s| s.state.clone()).collect();
        if states.is_empty() {
            return Ok(Step::Done(Verdict::Valid));
        }
        let t_anchor = a.first_time + start as u64 - 1;
        let check = validate_trajectory(
            ctx.op,
            &anchor,
            &states,
            t_anchor,
            &ctx.cfg.validation.tolerance,
        )?;
        costs.record_atomic(Role::Endorser, check.evaluations);
        a.evaluations += check.evaluations;
        a.deviations.extend(&check.deviations);
        match check.verdict {
            Verdict::Valid => Ok(Step::Done(Verdict::Valid)),
            Verdict::Invalid { offset: j, .. } => {
                let off = start + j;
                if a.slots[off].raw {
                    return Ok(Step::Done(Verdict::Invalid {
                        offset: off,
                        decode_failure: false,
                    }));
                }
                let t = a.first_time + off as u64;
                let notice = InvalidationNotice {
                    frame_index: a.unit,
                    offset: off,
                    deviation: check.deviations[j],
                    tolerance: ctx.cfg.validation.tolerance.at(t),
                };
                net.send(
                    costs,
                    ctx.clock,
                    self.id,
                    CLIENT_NODE,
                    MessageKind::InvalidationNotice,
                    NOTICE_BITS,
                    Body::Notice { notice, t },
                );
                Ok(Step::Waiting)
            }
        }
    }

    fn finish<C: Computation + ?Sized>(
        &mut self,
        ctx: &Ctx<'_, C>,
        net: &mut Network<Body>,
        costs: &mut CostLedger,
        verdict: Verdict,
    ) {
        let a = self.active.take().expect("active unit");
        if let Some(s) = a.slots.last() {
            self.last = Some(s.state.clone());
        }
        let payload = if self.lead_of.contains(&a.unit) && verdict.is_valid() {
            a.payload
        } else {
            None
        };
        let bits = VERDICT_BITS + payload.as_ref().map_or(0, |p| 8 * p.len() as u64);
        let e = Endorsement {
            frame_index: a.unit,
            verdict,
            deviations: a.deviations,
            endorser_id: self.id,
            recompute_count: a.evaluations,
        };
        net.send(
            costs,
            ctx.clock,
            self.id,
            ctx.orderer,
            MessageKind::EndorsementMsg,
            bits,
            Body::Endorse(e, payload),
        );
    }

    /// Works through queued units until one is waiting on the client or the ledger.
    fn progress<C: Computation + ?Sized>(
        &mut self,
        ctx: &Ctx<'_, C>,
        ledger: &LedgerView,
        net: &mut Network<Body>,
        costs: &mut CostLedger,
    ) -> Result<()> {
        while self.active.is_none() {
            let Some((&unit, _)) = self.inbox.first_key_value() else {
                return Ok(());
            };
            if ctx.mode == ProtocolMode::Batch && (ledger.last_states.len() as u64) < unit {
                return Ok(());
            }
            let report = self.inbox.remove(&unit).expect("present");
            match self.start(ctx, ledger, unit, report)? {
                Err(rejection) => {
                    net.send(
                        costs,
                        ctx.clock,
                        self.id,
                        ctx.orderer,
                        MessageKind::EndorsementMsg,
                        VERDICT_BITS,
                        Body::Endorse(rejection, None),
                    );
                }
                Ok(active) => {
                    self.active = Some(active);
                    if let Step::Done(v) = self.check_from(ctx, net, costs, 0)? {
                        self.finish(ctx, net, costs, v);
                    }
                }
            }
        }
        Ok(())
    }

    fn apply_fix<C: Computation + ?Sized>(
        &mut self,
        ctx: &Ctx<'_, C>,
        net: &mut Network<Body>,
        costs: &mut CostLedger,
        unit: u64,
        offset: usize,
        fix: Fix,
    ) -> Result<()> {
        let Some(a) = self.active.as_mut().filter(|a| a.unit == unit) else {
            return Ok(());
        };
        let slot = a
            .slots
            .get_mut(offset)
            .ok_or_else(|| Error::StaleRefinement(format!("no state at offset {offset}")))?;
        match fix {
            Fix::Refine(chunk) => {
                let (before, current) = slot
                    .update
                    .as_mut()
                    .ok_or_else(|| Error::StaleRefinement("checkpoint cannot be refined".into()))?;
                let refined = ctx.q.apply_refinement(current, &chunk)?;
                slot.state = before
                    .peek_refined(&ctx.q, &refined)
                    .ok_or(Error::NonFinite { index: 0 })?;
                *current = refined;
            }
            Fix::Raw(state) => {
                slot.state = state;
                slot.raw = true;
            }
        }
        if let Step::Done(v) = self.check_from(ctx, net, costs, offset)? {
            self.finish(ctx, net, costs, v);
        }
        Ok(())
    }
}

struct ClientNode {
    group_of: BTreeMap<u64, Vec<NodeId>>,
    handled: BTreeSet<(u64, usize, u32)>,
    levels: BTreeMap<u64, QuantizedUpdate>,
    resent: BTreeSet<u64>,
    /// For each iteration coded as an update: its frame and offset within the frame.
    update_of: BTreeMap<u64, UpdateRef>,
}

impl ClientNode {
    fn on_notice<C: Computation + ?Sized>(
        &mut self,
        ctx: &Ctx<'_, C>,
        run: &ClientRun,
        net: &mut Network<Body>,
        costs: &mut CostLedger,
        notice: InvalidationNotice,
        t: u64,
    ) -> Result<()> {
        let target = self.update_of.get(&t).copied();
        let current = target.map(|r| {
            self.levels
                .get(&t)
                .cloned()
                .unwrap_or_else(|| run.frames[r.frame_index as usize].updates()[r.offset].clone())
        });
        let level = current.as_ref().map_or(0, |u| u.level);
        let key = (notice.frame_index, notice.offset, level);
        if self.resent.contains(&t) || !self.handled.insert(key) {
            return Ok(());
        }
        costs.record_invalidation();
        let group = self.group_of[&notice.frame_index].clone();
        let action = match (&current, ctx.mode) {
            (Some(_), ProtocolMode::Streaming | ProtocolMode::Batch) => handle_invalidation(
                &notice,
                &InvalidationContext {
                    level,
                    dimension: ctx.q.dimension(),
                    lipschitz: ctx.cfg.validation.lipschitz,
                    max_error: ctx.q.max_error(),
                    recompute_ops: 1,
                },
                &ctx.cfg.policy,
            ),
            _ => InvalidationAction::RecomputeAndResend,
        };
        let chunk = match (action, target, current, &run.deltas[t as usize]) {
            (InvalidationAction::SendRefinement, Some(target), Some(current), Some(delta)) => ctx
                .q
                .refine(delta, &current, target)
                .ok()
                .map(|c| (c, current)),
            _ => None,
        };
        let (fix, bits) = match chunk {
            Some((chunk, current)) => {
                self.levels
                    .insert(t, ctx.q.apply_refinement(&current, &chunk)?);
                costs.record_refinement();
                let bits = chunk.bit_cost();
                (Fix::Refine(chunk), bits)
            }
            None => {
                let prev = &run.true_states[t as usize - 1];
                let state = step(ctx.op, prev, None)?;
                costs.record_atomic(Role::Client, 1);
                costs.record_recomputations(1);
                self.resent.insert(t);
                let bits = 64 * state.dim() as u64;
                (Fix::Raw(state), bits)
            }
        };
        for &to in &group {
            net.send(
                costs,
                ctx.clock,
                CLIENT_NODE,
                to,
                MessageKind::RefinementChunkMsg,
                bits,
                Body::Fix {
                    unit: notice.frame_index,
                    offset: notice.offset,
                    fix: fix.clone(),
                },
            );
        }
        Ok(())
    }
}

/// Client reports for every unit, with their sizes in bits.
fn reports(mode: ProtocolMode, run: &ClientRun) -> Result<Vec<(u64, Report, u64)>> {
    let q = &run.quantizer;
    let d = q.dimension() as u64;
    let mut out = Vec::new();
    match mode {
        ProtocolMode::Transaction => {
            for (t, x) in run.true_states.iter().enumerate() {
                let t = t as u64;
                out.push((
                    t,
                    Report::Raw {
                        t,
                        state: x.clone(),
                    },
                    64 * d,
                ));
            }
        }
        ProtocolMode::Streaming => {
            for f in &run.frames {
                let t0 = f.checkpoint_time();
                let code_bits = match f.checkpoint() {
                    CheckpointCode::DictIndex(_) => 64,
                    CheckpointCode::NewEntry(_) => 64 * d,
                };
                out.push((
                    t0,
                    Report::Checkpoint {
                        t: t0,
                        code: f.checkpoint().clone(),
                    },
                    8 + code_bits,
                ));
                for (j, u) in f.updates().iter().enumerate() {
                    let t = t0 + 1 + j as u64;
                    out.push((
                        t,
                        Report::Delta {
                            t,
                            update: u.clone(),
                        },
                        q.update_bit_cost(),
                    ));
                }
            }
        }
        ProtocolMode::Batch => {
            for f in &run.frames {
                let bits = f.encode(q)?;
                let len = bits.bit_len;
                out.push((
                    f.index(),
                    Report::Frame {
                        index: f.index(),
                        checkpoint_time: f.checkpoint_time(),
                        bits,
                    },
                    len,
                ));
            }
        }
    }
    Ok(out)
}

/// Runs the client for `iterations` steps and drives every report through endorsement and
/// ordering until the network is idle.
pub fn run_session<C: Computation + ?Sized>(
    op: &C,
    x0: &StateVector,
    iterations: u64,
    mode: ProtocolMode,
    cfg: &SessionConfig,
) -> Result<SessionOutcome> {
    if op.is_stochastic() {
        return Err(Error::NotVerifiable(
            "sessions replay deterministic operations only".into(),
        ));
    }
    if cfg.period == 0 {
        return Err(Error::InvalidParameter("period must be at least 1".into()));
    }
    let pool = cfg.pool.max(1);
    let per = cfg.endorsers.clamp(1, pool);
    let mut costs = CostLedger::new();
    let run = client_run_frames(op, x0, iterations, &cfg.validation, cfg.run_seed)?;
    costs.record_atomic(Role::Client, run.evaluations);
    costs.record_iterations(iterations);
    let q = run.quantizer;
    let mut ctx = Ctx {
        op,
        q,
        cfg,
        mode,
        orderer: cfg.orderer(),
        clock: 0,
    };

    let reports = reports(mode, &run)?;
    let units = reports.len() as u64;
    match mode {
        ProtocolMode::Transaction => {}
        ProtocolMode::Streaming => costs.record_codec(run.codec_ops()),
        // client quantization, one encode per frame, and the lead endorser's subsampling
        ProtocolMode::Batch => costs.record_codec(run.codec_ops() + run.frames.len() as u64),
    }

    let fresh_dict = CheckpointDictionary::new(q, cfg.validation.state_bound)?;
    let mut endorsers: BTreeMap<NodeId, EndorserNode> = (1..=pool as NodeId)
        .map(|id| {
            (
                id,
                EndorserNode {
                    id,
                    lead_of: BTreeSet::new(),
                    inbox: BTreeMap::new(),
                    active: None,
                    dictionary: fresh_dict.clone(),
                    recon: None,
                    last: None,
                },
            )
        })
        .collect();
    let mut client = ClientNode {
        group_of: BTreeMap::new(),
        handled: BTreeSet::new(),
        levels: BTreeMap::new(),
        resent: BTreeSet::new(),
        update_of: BTreeMap::new(),
    };
    for f in &run.frames {
        for j in 0..f.len() {
            client.update_of.insert(
                f.checkpoint_time() + 1 + j as u64,
                UpdateRef {
                    frame_index: f.index(),
                    offset: j,
                },
            );
        }
    }
    let mut ledger = LedgerView {
        dictionary: fresh_dict,
        last_states: Vec::new(),
    };
    let mut net: Network<Body> = Network::new(cfg.meta_bits, CLIENT_NODE);
    for (unit, report, bits) in reports {
        let group = match mode {
            ProtocolMode::Batch => assign_endorsers(unit, pool, per),
            _ => assign_endorsers(0, pool, per),
        };
        endorsers
            .get_mut(&group[0])
            .expect("pool member")
            .lead_of
            .insert(unit);
        for &to in &group {
            net.send(
                &mut costs,
                0,
                CLIENT_NODE,
                to,
                MessageKind::FrameReport,
                bits,
                Body::Report(report.clone()),
            );
        }
        client.group_of.insert(unit, group);
    }

    let mut buffer = OrderingBuffer::new(per);
    let mut payloads: BTreeMap<u64, Vec<u8>> = BTreeMap::new();
    let mut chain = AuditChain::new();
    let mut endorsements = Vec::new();
    while let Some(env) = net.deliver(&mut costs) {
        ctx.clock += 1;
        match env.body {
            Body::Report(report) => {
                let e = endorsers.get_mut(&env.to).expect("endorser");
                let unit = match &report {
                    Report::Raw { t, .. }
                    | Report::Checkpoint { t, .. }
                    | Report::Delta { t, .. } => *t,
                    Report::Frame { index, .. } => *index,
                };
                e.inbox.insert(unit, report);
                e.progress(&ctx, &ledger, &mut net, &mut costs)?;
            }
            Body::Notice { notice, t } => {
                client.on_notice(&ctx, &run, &mut net, &mut costs, notice, t)?;
            }
            Body::Fix { unit, offset, fix } => {
                let e = endorsers.get_mut(&env.to).expect("endorser");
                e.apply_fix(&ctx, &mut net, &mut costs, unit, offset, fix)?;
                e.progress(&ctx, &ledger, &mut net, &mut costs)?;
            }
            Body::Endorse(e, payload) => {
                if let Some(p) = payload {
                    payloads.insert(e.frame_index, p);
                }
                endorsements.push(e.clone());
                for unit in buffer.submit(e) {
                    let payload = payloads
                        .remove(&unit)
                        .ok_or_else(|| Error::Decode(format!("no payload for unit {unit}")))?;
                    if mode == ProtocolMode::Batch {
                        let decoded = Payload::decode(&payload, q.dimension())?;
                        costs.record_codec(decoded.audits().len() as u64 - 1);
                        ledger.absorb(&q, &decoded)?;
                    }
                    let block = chain.append(unit, payload)?;
                    costs.record_storage(block.payload_bits(), HEADER_BITS);
                    if mode == ProtocolMode::Batch {
                        if let Some(next) = client.group_of.get(&(unit + 1)) {
                            for &to in next {
                                net.send(
                                    &mut costs,
                                    ctx.clock,
                                    ctx.orderer,
                                    to,
                                    MessageKind::CommitNotice,
                                    COMMIT_BITS,
                                    Body::Commit(unit),
                                );
                            }
                        }
                    }
                }
            }
            Body::Commit(unit) => {
                debug_assert!(ledger.last_states.len() as u64 > unit);
                let e = endorsers.get_mut(&env.to).expect("endorser");
                e.progress(&ctx, &ledger, &mut net, &mut costs)?;
            }
        }
    }
    Ok(SessionOutcome {
        mode,
        committed: chain.len() as u64,
        units,
        halted_at: buffer.halted_at(),
        run,
        chain,
        costs,
        trace: net.into_trace(),
        endorsements,
    })
}

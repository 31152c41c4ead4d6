//! Computation, communication and storage accounting, and the closed-form cost model.

use serde::{Deserialize, Serialize};

use crate::protocol::ProtocolMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Client,
    Endorser,
    Orderer,
    Verifier,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Client, Role::Endorser, Role::Orderer, Role::Verifier];

    fn slot(self) -> usize {
        self as usize
    }
}

/// Monotone counters filled in while a run executes. Fields are read-only outside this module;
/// use the `record_*` methods to add to them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    atomic_ops: [u64; 4],
    codec_ops: u64,
    comm_bits: u64,
    comm_meta_bits: u64,
    received_bits: u64,
    received_meta_bits: u64,
    report_bits: u64,
    report_meta_bits: u64,
    messages: u64,
    storage_bits: u64,
    storage_meta_bits: u64,
    iterations: u64,
    recomputations: u64,
    refinements: u64,
    invalidations: u64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_atomic(&mut self, role: Role, n: u64) {
        self.atomic_ops[role.slot()] += n;
    }

    pub fn record_codec(&mut self, n: u64) {
        self.codec_ops += n;
    }

    /// A message leaving its sender. Client state reports are also tallied separately.
    pub fn record_send(&mut self, payload_bits: u64, meta_bits: u64, client_report: bool) {
        self.comm_bits += payload_bits;
        self.comm_meta_bits += meta_bits;
        self.messages += 1;
        if client_report {
            self.report_bits += payload_bits;
            self.report_meta_bits += meta_bits;
        }
    }

    pub fn record_receive(&mut self, payload_bits: u64, meta_bits: u64) {
        self.received_bits += payload_bits;
        self.received_meta_bits += meta_bits;
    }

    pub fn record_storage(&mut self, payload_bits: u64, meta_bits: u64) {
        self.storage_bits += payload_bits;
        self.storage_meta_bits += meta_bits;
    }

    pub fn record_iterations(&mut self, n: u64) {
        self.iterations += n;
    }

    /// Atomic evaluations the client repeats because of invalidations.
    pub fn record_recomputations(&mut self, n: u64) {
        self.recomputations += n;
    }

    pub fn record_refinement(&mut self) {
        self.refinements += 1;
    }

    pub fn record_invalidation(&mut self) {
        self.invalidations += 1;
    }

    pub fn atomic_ops(&self, role: Role) -> u64 {
        self.atomic_ops[role.slot()]
    }

    pub fn total_atomic_ops(&self) -> u64 {
        self.atomic_ops.iter().sum()
    }

    pub fn codec_ops(&self) -> u64 {
        self.codec_ops
    }

    /// Atomic evaluations plus codec operations.
    pub fn comp_ops(&self) -> u64 {
        self.total_atomic_ops() + self.codec_ops
    }

    pub fn comm_bits(&self) -> u64 {
        self.comm_bits
    }

    pub fn comm_meta_bits(&self) -> u64 {
        self.comm_meta_bits
    }

    pub fn received_bits(&self) -> u64 {
        self.received_bits
    }

    pub fn received_meta_bits(&self) -> u64 {
        self.received_meta_bits
    }

    pub fn report_bits(&self) -> u64 {
        self.report_bits
    }

    pub fn report_meta_bits(&self) -> u64 {
        self.report_meta_bits
    }

    pub fn messages(&self) -> u64 {
        self.messages
    }

    pub fn storage_bits(&self) -> u64 {
        self.storage_bits
    }

    pub fn storage_meta_bits(&self) -> u64 {
        self.storage_meta_bits
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn recomputations(&self) -> u64 {
        self.recomputations
    }

    pub fn refinements(&self) -> u64 {
        self.refinements
    }

    pub fn invalidations(&self) -> u64 {
        self.invalidations
    }

    /// Adds another ledger's counters (e.g. a verifier pass) into this one.
    pub fn absorb(&mut self, other: &CostLedger) {
        for (a, b) in self.atomic_ops.iter_mut().zip(other.atomic_ops) {
            *a += b;
        }
        self.codec_ops += other.codec_ops;
        self.comm_bits += other.comm_bits;
        self.comm_meta_bits += other.comm_meta_bits;
        self.received_bits += other.received_bits;
        self.received_meta_bits += other.received_meta_bits;
        self.report_bits += other.report_bits;
        self.report_meta_bits += other.report_meta_bits;
        self.messages += other.messages;
        self.storage_bits += other.storage_bits;
        self.storage_meta_bits += other.storage_meta_bits;
        self.iterations += other.iterations;
        self.recomputations += other.recomputations;
        self.refinements += other.refinements;
        self.invalidations += other.invalidations;
    }
}

/// Parameters of the closed-form cost model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub mode: ProtocolMode,
    /// Average endorsers per frame, `Ē`.
    pub endorsers: f64,
    /// Average frame size, `M̄`.
    pub frame_size: f64,
    /// Subsampling period `K` (`ν = 1/K`).
    pub period: u64,
    pub dimension: usize,
    /// State-space bound `B`.
    pub state_bound: f64,
    pub max_error: f64,
    pub quant_radius: f64,
    pub meta_bits: f64,
}

/// Predicted bits per `M̄`-iteration window with all big-O constants set to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedCost {
    pub comp_ops: f64,
    pub comm_bits: f64,
    pub storage_bits: f64,
}

pub fn predicted_cost(p: &ModeParams) -> PredictedCost {
    let d = p.dimension as f64;
    let m = p.frame_size;
    let full = d * (p.state_bound / p.max_error).log2();
    let delta = d * (p.quant_radius / p.max_error).log2();
    let nu = 1.0 / p.period.max(1) as f64;
    let sim = (1.0 + p.endorsers) * m;
    match p.mode {
        ProtocolMode::Transaction => {
            let comm = m * full + m * p.meta_bits;
            PredictedCost {
                comp_ops: sim,
                comm_bits: comm,
                storage_bits: comm,
            }
        }
        ProtocolMode::Streaming => {
            let cost = m * delta + full + m * p.meta_bits;
            PredictedCost {
                comp_ops: sim + m,
                comm_bits: cost,
                storage_bits: cost,
            }
        }
        ProtocolMode::Batch => PredictedCost {
            comp_ops: sim + m + nu * m,
            comm_bits: m * delta + full + p.meta_bits,
            storage_bits: nu * m * delta + full + p.meta_bits,
        },
    }
}

/// Measured costs scaled to one `M̄`-iteration window, next to the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostComparison {
    pub measured: PredictedCost,
    pub predicted: PredictedCost,
}

impl CostComparison {
    pub fn comm_ratio(&self) -> f64 {
        self.measured.comm_bits / self.predicted.comm_bits
    }

    pub fn storage_ratio(&self) -> f64 {
        self.measured.storage_bits / self.predicted.storage_bits
    }
}

/// Client upload (per endorser copy) and ledger storage, both including metadata, per window.
pub fn measured_vs_predicted(costs: &CostLedger, p: &ModeParams) -> CostComparison {
    let iters = costs.iterations().max(1) as f64;
    let window = p.frame_size / iters;
    let copies = p.endorsers.max(1.0);
    let measured = PredictedCost {
        comp_ops: costs.comp_ops() as f64 * window,
        comm_bits: (costs.report_bits() + costs.report_meta_bits()) as f64 / copies * window,
        storage_bits: (costs.storage_bits() + costs.storage_meta_bits()) as f64 * window,
    };
    CostComparison {
        measured,
        predicted: predicted_cost(p),
    }
}

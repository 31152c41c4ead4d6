use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bounds::max_quantizer_error;
use crate::codec::LatticeQuantizer;
use crate::error::{Error, Result};

/// Validation tolerance as a function of the iteration index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceSchedule {
    Constant(f64),
    /// `Δ_max / ln(t + 1)` for `t ≥ 1`.
    Logarithmic {
        max: f64,
    },
}

impl ToleranceSchedule {
    /// Tolerance applied to the state at iteration `t`. Iteration 0 is treated as 1.
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            ToleranceSchedule::Constant(v) => v,
            ToleranceSchedule::Logarithmic { max } => max / ((t.max(1) + 1) as f64).ln(),
        }
    }

    /// Smallest tolerance over iterations `1..=horizon`.
    pub fn min_over(&self, horizon: u64) -> f64 {
        self.at(horizon.max(1))
    }

    pub fn scale(&self) -> f64 {
        match *self {
            ToleranceSchedule::Constant(v) => v,
            ToleranceSchedule::Logarithmic { max } => max,
        }
    }

    pub fn with_scale(&self, v: f64) -> Self {
        match self {
            ToleranceSchedule::Constant(_) => ToleranceSchedule::Constant(v),
            ToleranceSchedule::Logarithmic { .. } => ToleranceSchedule::Logarithmic { max: v },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolMode {
    /// Every state sent uncompressed as its own transaction.
    Transaction,
    /// Every state sent as a compressed delta in its own message.
    Streaming,
    /// Frames of compressed deltas, stored as subsampled audits.
    Batch,
}

impl ProtocolMode {
    pub const ALL: [ProtocolMode; 3] = [
        ProtocolMode::Transaction,
        ProtocolMode::Streaming,
        ProtocolMode::Batch,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProtocolMode::Transaction => "transaction",
            ProtocolMode::Streaming => "streaming",
            ProtocolMode::Batch => "batch",
        }
    }
}

impl fmt::Display for ProtocolMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transaction" => Ok(ProtocolMode::Transaction),
            "streaming" => Ok(ProtocolMode::Streaming),
            "batch" => Ok(ProtocolMode::Batch),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub tolerance: ToleranceSchedule,
    pub verify_tolerance: f64,
    /// Largest update magnitude coded as a delta; bigger jumps open a new frame.
    pub quant_radius: f64,
    pub max_error: f64,
    pub frame_cap: usize,
    pub lipschitz: f64,
    pub mode: ProtocolMode,
    /// Require `ε ≤ Δ_val / (L + 1)` over the whole run.
    pub strict_soundness: bool,
    /// State-space bound `B` used to price checkpoints.
    pub state_bound: f64,
}

impl ValidationConfig {
    /// Sound defaults around a constant tolerance: `ε = Δ_val/(L+1)`, `Δ_ver = Δ_val`.
    pub fn for_tolerance(tolerance: f64, lipschitz: f64) -> Self {
        ValidationConfig {
            tolerance: ToleranceSchedule::Constant(tolerance),
            verify_tolerance: tolerance,
            quant_radius: 1.0,
            max_error: max_quantizer_error(tolerance, lipschitz),
            frame_cap: 100,
            lipschitz,
            mode: ProtocolMode::Batch,
            strict_soundness: true,
            state_bound: 1e3,
        }
    }

    /// Checks the invariants for a run of `horizon` iterations.
    pub fn validate(&self, horizon: u64) -> Result<()> {
        let min_val = self.tolerance.min_over(horizon);
        if !(self.verify_tolerance > 0.0) {
            return Err(Error::Config(
                "verification tolerance must be positive".into(),
            ));
        }
        if min_val < self.verify_tolerance {
            return Err(Error::Config(format!(
                "validation tolerance {min_val} falls below verification tolerance {}",
                self.verify_tolerance
            )));
        }
        if !(self.lipschitz >= 0.0) {
            return Err(Error::Config(format!(
                "Lipschitz constant {}",
                self.lipschitz
            )));
        }
        if self.frame_cap == 0 {
            return Err(Error::Config("frame cap must be at least 1".into()));
        }
        if self.strict_soundness {
            let limit = max_quantizer_error(min_val, self.lipschitz);
            if self.max_error > limit {
                return Err(Error::Config(format!(
                    "max error {} exceeds sound limit {limit}",
                    self.max_error
                )));
            }
        }
        if !(self.state_bound > self.quant_radius) {
            return Err(Error::Config(
                "state bound must exceed quantizer range".into(),
            ));
        }
        Ok(())
    }

    pub fn quantizer(&self, dimension: usize) -> Result<LatticeQuantizer> {
        LatticeQuantizer::new(dimension, self.max_error, self.quant_radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizedConfig {
    pub endorsers: usize,
    pub outlier_prob: f64,
    pub margin: f64,
    /// Covariance eigenvalue bound; estimated from the recomputations when absent.
    pub lambda: Option<f64>,
}

impl RandomizedConfig {
    pub fn validate(&self, lipschitz: f64, max_error: f64) -> Result<()> {
        if self.endorsers == 0 {
            return Err(Error::Config("at least one endorser".into()));
        }
        if !(self.outlier_prob > 0.0 && self.outlier_prob < 1.0) {
            return Err(Error::Config(format!(
                "outlier probability {}",
                self.outlier_prob
            )));
        }
        if !(self.margin > (lipschitz + 1.0) * max_error) {
            return Err(Error::Config(format!(
                "margin {} must exceed (L+1)ε = {}",
                self.margin,
                (lipschitz + 1.0) * max_error
            )));
        }
        Ok(())
    }
}

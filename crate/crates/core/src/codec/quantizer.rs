//! Cubic-lattice quantization of state updates and successive refinement.

use serde::{Deserialize, Serialize};

use super::bits::bits_for_count;
use crate::compute::StateVector;
use crate::error::{Error, Result};

/// Relative slack on the refinement precondition to absorb floating-point rounding.
const REFINE_SLACK: f64 = 1e-9;

/// Scaled cubic lattice with pitch `s = 2ε/√d`, so every rounding error is at most `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeQuantizer {
    dimension: usize,
    max_error: f64,
    step: f64,
    clamp_radius: f64,
}

/// Lattice indices of one quantized update. The represented value is `indices · s / 2^level`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantizedUpdate {
    pub indices: Vec<i64>,
    pub level: u32,
}

/// Which update of which frame a refinement chunk improves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UpdateRef {
    pub frame_index: u64,
    pub offset: usize,
}

/// Per-coordinate corrections in `{-1, 0, 1}` that move an update one level finer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementChunk {
    pub target: UpdateRef,
    pub level: u32,
    pub corrections: Vec<i8>,
}

impl RefinementChunk {
    /// Two bits per coordinate.
    pub fn bit_cost(&self) -> u64 {
        2 * self.corrections.len() as u64
    }
}

impl QuantizedUpdate {
    pub fn zero(d: usize) -> Self {
        QuantizedUpdate {
            indices: vec![0; d],
            level: 0,
        }
    }

    /// Indices expressed at a finer level.
    pub fn indices_at(&self, level: u32) -> Vec<i64> {
        debug_assert!(level >= self.level);
        let shift = level - self.level;
        self.indices.iter().map(|i| i << shift).collect()
    }
}

/// Nearest integer with ties to even.
fn round_index(v: f64) -> i64 {
    v.round_ties_even() as i64
}

impl LatticeQuantizer {
    pub fn new(dimension: usize, max_error: f64, clamp_radius: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !(max_error > 0.0 && max_error.is_finite()) {
            return Err(Error::InvalidParameter(format!("max error {max_error}")));
        }
        if !(clamp_radius > max_error && clamp_radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "quantizer range {clamp_radius} must exceed max error {max_error}"
            )));
        }
        Ok(LatticeQuantizer {
            dimension,
            max_error,
            step: 2.0 * max_error / (dimension as f64).sqrt(),
            clamp_radius,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn max_error(&self) -> f64 {
        self.max_error
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn clamp_radius(&self) -> f64 {
        self.clamp_radius
    }

    /// Pitch at a refinement level.
    pub fn step_at(&self, level: u32) -> f64 {
        self.step * 0.5f64.powi(level as i32)
    }

    /// Largest index magnitude a base-level update can take, `ceil(Δ_quant / s)`.
    pub fn max_index(&self) -> u64 {
        (self.clamp_radius / self.step).ceil() as u64
    }

    /// Width of one coordinate in the fixed-width encoding.
    pub fn coordinate_bits(&self) -> u32 {
        bits_for_count(2 * self.max_index() + 1)
    }

    /// Bits per encoded update: `d · ceil(log2(2·ceil(Δ_quant/s) + 1))`.
    pub fn update_bit_cost(&self) -> u64 {
        self.dimension as u64 * self.coordinate_bits() as u64
    }

    fn check_dim(&self, actual: usize) -> Result<()> {
        if actual != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual,
            });
        }
        Ok(())
    }

    pub fn quantize(&self, delta: &StateVector) -> Result<QuantizedUpdate> {
        self.check_dim(delta.dim())?;
        let norm = delta.norm();
        if norm > self.clamp_radius {
            return Err(Error::UpdateOutOfRange {
                norm,
                limit: self.clamp_radius,
            });
        }
        Ok(QuantizedUpdate {
            indices: delta
                .as_slice()
                .iter()
                .map(|v| round_index(v / self.step))
                .collect(),
            level: 0,
        })
    }

    pub fn dequantize(&self, u: &QuantizedUpdate) -> Result<StateVector> {
        self.check_dim(u.indices.len())?;
        Ok(
            StateVector::new(self.lattice_point(&u.indices, u.level))
                .expect("finite lattice point"),
        )
    }

    /// `indices · s / 2^level`, the one formula every peer uses to turn indices into state units.
    pub fn lattice_point(&self, indices: &[i64], level: u32) -> Vec<f64> {
        let scale = 0.5f64.powi(level as i32);
        indices
            .iter()
            .map(|&i| (i as f64 * self.step) * scale)
            .collect()
    }

    /// Nearest lattice point of an arbitrary state (no range check), used for checkpoints.
    pub fn snap(&self, x: &StateVector) -> Result<StateVector> {
        // stays in f64: checkpoints may lie far outside the i64 index range
        let v = x
            .as_slice()
            .iter()
            .map(|v| (v / self.step).round_ties_even() * self.step)
            .collect();
        StateVector::new(v)
    }

    /// Chunk that moves `current` one level finer toward `true_delta`.
    pub fn refine(
        &self,
        true_delta: &StateVector,
        current: &QuantizedUpdate,
        target: UpdateRef,
    ) -> Result<RefinementChunk> {
        self.check_dim(true_delta.dim())?;
        self.check_dim(current.indices.len())?;
        let recon = self.dequantize(current)?;
        let err = recon.distance(true_delta);
        let allowed = self.max_error * 0.5f64.powi(current.level as i32);
        if err > allowed * (1.0 + REFINE_SLACK) {
            return Err(Error::StaleRefinement(format!(
                "base error {err} exceeds {allowed} at level {}",
                current.level
            )));
        }
        let level = current.level + 1;
        let h = self.step_at(level);
        let mut corrections = Vec::with_capacity(self.dimension);
        for (v, old) in true_delta.as_slice().iter().zip(&current.indices) {
            let c = round_index(v / h) - 2 * old;
            if !(-1..=1).contains(&c) {
                return Err(Error::StaleRefinement(format!(
                    "correction {c} outside {{-1, 0, 1}}"
                )));
            }
            corrections.push(c as i8);
        }
        Ok(RefinementChunk {
            target,
            level,
            corrections,
        })
    }

    /// Applies a chunk produced for `current`.
    pub fn apply_refinement(
        &self,
        current: &QuantizedUpdate,
        chunk: &RefinementChunk,
    ) -> Result<QuantizedUpdate> {
        self.check_dim(chunk.corrections.len())?;
        if chunk.level != current.level + 1 {
            return Err(Error::StaleRefinement(format!(
                "chunk level {} applied to level {}",
                chunk.level, current.level
            )));
        }
        Ok(QuantizedUpdate {
            indices: current
                .indices
                .iter()
                .zip(&chunk.corrections)
                .map(|(o, c)| 2 * o + *c as i64)
                .collect(),
            level: chunk.level,
        })
    }
}

//! ε-tolerant dictionary of checkpoint states.

use serde::{Deserialize, Serialize};

use super::quantizer::LatticeQuantizer;
use crate::compute::StateVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CheckpointCode {
    DictIndex(u64),
    /// A checkpoint not yet in the dictionary, already snapped to the lattice.
    NewEntry(StateVector),
}

/// Checkpoints seen so far in a run. Encoding reuses the first entry within `ε`; otherwise the
/// lattice-snapped state is appended.
///
/// Entries are snapped on the cubic lattice, so the snapped point can sit up to `ε` from the
/// state that created it. For `d > 4` two entries can therefore end up within `ε` of each other;
/// reuse of an existing entry is unaffected.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointDictionary {
    entries: Vec<StateVector>,
    tolerance: f64,
    quantizer: LatticeQuantizer,
    /// Coordinate range `B` used when pricing a new entry.
    range: f64,
}

impl CheckpointDictionary {
    /// Uses `quantizer`'s lattice and its `ε` as the reuse tolerance.
    pub fn new(quantizer: LatticeQuantizer, range: f64) -> Result<Self> {
        if !(range > 0.0) {
            return Err(Error::InvalidParameter(format!("checkpoint range {range}")));
        }
        Ok(CheckpointDictionary {
            entries: Vec::new(),
            tolerance: quantizer.max_error(),
            quantizer,
            range,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[StateVector] {
        &self.entries
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn get(&self, i: u64) -> Option<&StateVector> {
        self.entries.get(i as usize)
    }

    /// Index of the first entry within `ε` of `x`.
    pub fn lookup(&self, x: &StateVector) -> Option<u64> {
        self.entries
            .iter()
            .position(|e| e.dim() == x.dim() && e.distance(x) <= self.tolerance)
            .map(|i| i as u64)
    }

    pub fn encode(&mut self, x: &StateVector) -> Result<CheckpointCode> {
        if x.dim() != self.quantizer.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.quantizer.dimension(),
                actual: x.dim(),
            });
        }
        if let Some(i) = self.lookup(x) {
            return Ok(CheckpointCode::DictIndex(i));
        }
        let snapped = self.quantizer.snap(x)?;
        self.entries.push(snapped.clone());
        Ok(CheckpointCode::NewEntry(snapped))
    }

    /// State a code stands for. `NewEntry` codes are self-describing.
    pub fn resolve(&self, code: &CheckpointCode) -> Result<StateVector> {
        match code {
            CheckpointCode::NewEntry(x) => Ok(x.clone()),
            CheckpointCode::DictIndex(i) => self
                .get(*i)
                .cloned()
                .ok_or_else(|| Error::Decode(format!("unknown dictionary entry {i}"))),
        }
    }

    /// Receiver side: records a `NewEntry` seen on the wire so later indices resolve.
    pub fn absorb(&mut self, code: &CheckpointCode) {
        if let CheckpointCode::NewEntry(x) = code {
            self.entries.push(x.clone());
        }
    }

    /// Modelled bits of a new entry: `d · ceil(log2(B/ε))`.
    pub fn entry_bits(&self) -> u64 {
        let per = (self.range / self.tolerance).log2().ceil().max(1.0) as u64;
        self.quantizer.dimension() as u64 * per
    }
}

//! Frames: a checkpoint header followed by quantized updates, and their bitstream.

use serde::{Deserialize, Serialize};

use super::bits::{BitReader, BitWriter};
use super::dictionary::CheckpointCode;
use super::quantizer::{LatticeQuantizer, QuantizedUpdate, RefinementChunk};
use crate::compute::StateVector;
use crate::error::{Error, Result};

pub const FRAME_MAGIC: u8 = 0xAF;
const TAG_DICT: u8 = 0;
const TAG_NEW: u8 = 1;

/// A run of reported states starting at a checkpoint.
///
/// Updates are base-level lattice indices. A refinement replaces the reported state at one offset
/// with a finer reconstruction of the same delta; states after it still chain from the base
/// reconstruction, which is what the client quantized against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    index: u64,
    checkpoint: CheckpointCode,
    checkpoint_time: u64,
    updates: Vec<QuantizedUpdate>,
    refined: Vec<Option<QuantizedUpdate>>,
    sealed: bool,
}

/// Encoded frame bytes plus the exact number of meaningful bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitstream {
    pub bytes: Vec<u8>,
    pub bit_len: u64,
}

impl Frame {
    pub fn new(index: u64, checkpoint: CheckpointCode, checkpoint_time: u64) -> Self {
        Frame {
            index,
            checkpoint,
            checkpoint_time,
            updates: Vec::new(),
            refined: Vec::new(),
            sealed: false,
        }
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn checkpoint(&self) -> &CheckpointCode {
        &self.checkpoint
    }

    pub fn checkpoint_time(&self) -> u64 {
        self.checkpoint_time
    }

    pub fn updates(&self) -> &[QuantizedUpdate] {
        &self.updates
    }

    pub fn len(&self) -> usize {
        self.updates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.updates.is_empty()
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    /// Iteration of the last reported state.
    pub fn end_time(&self) -> u64 {
        self.checkpoint_time + self.updates.len() as u64
    }

    pub fn push_update(&mut self, u: QuantizedUpdate) -> Result<()> {
        if self.sealed {
            return Err(Error::InvalidParameter(format!(
                "frame {} is sealed",
                self.index
            )));
        }
        if u.level != 0 {
            return Err(Error::InvalidParameter(
                "frames carry base-level updates".into(),
            ));
        }
        self.updates.push(u);
        self.refined.push(None);
        Ok(())
    }

    pub fn seal(&mut self) {
        self.sealed = true;
    }

    pub fn has_refinements(&self) -> bool {
        self.refined.iter().any(Option::is_some)
    }

    /// Current best update at an offset (refined if a chunk was applied).
    pub fn effective_update(&self, offset: usize) -> Option<&QuantizedUpdate> {
        self.refined
            .get(offset)?
            .as_ref()
            .or_else(|| self.updates.get(offset))
    }

    /// A copy of this sealed frame with one more refinement level at the chunk's target.
    pub fn with_refinement(&self, q: &LatticeQuantizer, chunk: &RefinementChunk) -> Result<Frame> {
        if !self.sealed {
            return Err(Error::UnsealedFrame(self.index));
        }
        if chunk.target.frame_index != self.index {
            return Err(Error::StaleRefinement(format!(
                "chunk for frame {} applied to frame {}",
                chunk.target.frame_index, self.index
            )));
        }
        let offset = chunk.target.offset;
        let current = self
            .effective_update(offset)
            .ok_or_else(|| Error::StaleRefinement(format!("no update at offset {offset}")))?;
        let next = q.apply_refinement(current, chunk)?;
        let mut out = self.clone();
        out.refined[offset] = Some(next);
        Ok(out)
    }

    /// Reported states `X̃_{T_n}, …, X̃_{T_n+M_n}` given the resolved checkpoint.
    pub fn reported_states(
        &self,
        q: &LatticeQuantizer,
        checkpoint: &StateVector,
    ) -> Result<Vec<StateVector>> {
        if checkpoint.dim() != q.dimension() {
            return Err(Error::DimensionMismatch {
                expected: q.dimension(),
                actual: checkpoint.dim(),
            });
        }
        let mut out = Vec::with_capacity(self.updates.len() + 1);
        out.push(checkpoint.clone());
        let mut chain = Reconstructor::new(checkpoint.clone());
        for (u, r) in self.updates.iter().zip(&self.refined) {
            let state = match r {
                Some(r) => chain.peek_refined(q, r),
                None => None,
            };
            let base = chain.advance(q, u)?;
            out.push(state.unwrap_or(base));
        }
        Ok(out)
    }

    pub fn encode(&self, q: &LatticeQuantizer) -> Result<Bitstream> {
        if !self.sealed {
            return Err(Error::UnsealedFrame(self.index));
        }
        if self.has_refinements() {
            return Err(Error::RefinedFrame(self.index));
        }
        let width = q.coordinate_bits();
        let mut w = BitWriter::new();
        w.write_bits(FRAME_MAGIC as u64, 8);
        w.write_bytes(&self.index.to_le_bytes());
        match &self.checkpoint {
            CheckpointCode::DictIndex(i) => {
                w.write_bits(TAG_DICT as u64, 8);
                w.write_bytes(&i.to_le_bytes());
            }
            CheckpointCode::NewEntry(x) => {
                if x.dim() != q.dimension() {
                    return Err(Error::DimensionMismatch {
                        expected: q.dimension(),
                        actual: x.dim(),
                    });
                }
                w.write_bits(TAG_NEW as u64, 8);
                for v in x.as_slice() {
                    w.write_bytes(&v.to_le_bytes());
                }
            }
        }
        w.write_bytes(&(self.updates.len() as u64).to_le_bytes());
        let bound = q.max_index() as i64;
        for u in &self.updates {
            if u.indices.len() != q.dimension() {
                return Err(Error::DimensionMismatch {
                    expected: q.dimension(),
                    actual: u.indices.len(),
                });
            }
            for &i in &u.indices {
                if i.abs() > bound {
                    return Err(Error::InvalidParameter(format!(
                        "index {i} outside ±{bound}"
                    )));
                }
                w.write_signed(i, width);
            }
        }
        let (bytes, bit_len) = w.finish();
        Ok(Bitstream { bytes, bit_len })
    }

    /// Inverse of [`Frame::encode`]. The checkpoint time travels out of band.
    pub fn decode(bs: &Bitstream, q: &LatticeQuantizer, checkpoint_time: u64) -> Result<Frame> {
        if bs.bytes.len() as u64 != bs.bit_len.div_ceil(8) {
            return Err(Error::Decode(format!(
                "{} bytes for {} bits",
                bs.bytes.len(),
                bs.bit_len
            )));
        }
        let mut r = BitReader::new(&bs.bytes);
        let magic = r.read_u8()?;
        if magic != FRAME_MAGIC {
            return Err(Error::Decode(format!("bad magic {magic:#04x}")));
        }
        let index = r.read_u64_le()?;
        let checkpoint = match r.read_u8()? {
            TAG_DICT => CheckpointCode::DictIndex(r.read_u64_le()?),
            TAG_NEW => {
                let mut v = Vec::with_capacity(q.dimension());
                for _ in 0..q.dimension() {
                    v.push(r.read_f64_le()?);
                }
                CheckpointCode::NewEntry(
                    StateVector::new(v).map_err(|e| Error::Decode(e.to_string()))?,
                )
            }
            t => return Err(Error::Decode(format!("bad checkpoint tag {t}"))),
        };
        let count = r.read_u64_le()?;
        let width = q.coordinate_bits();
        let needed = count
            .checked_mul(q.update_bit_cost())
            .ok_or_else(|| Error::Decode("update count overflow".into()))?;
        if r.position() + needed != bs.bit_len {
            return Err(Error::Decode(format!(
                "{count} updates need {needed} bits, stream has {}",
                bs.bit_len - r.position().min(bs.bit_len)
            )));
        }
        let mut frame = Frame::new(index, checkpoint, checkpoint_time);
        for _ in 0..count {
            let mut idx = Vec::with_capacity(q.dimension());
            for _ in 0..q.dimension() {
                idx.push(r.read_signed(width)?);
            }
            frame.push_update(QuantizedUpdate {
                indices: idx,
                level: 0,
            })?;
        }
        if r.read_bits(r.remaining() as u32)? != 0 {
            return Err(Error::Decode("nonzero padding".into()));
        }
        frame.seal();
        Ok(frame)
    }
}

/// Header bits for a frame: magic, index, tag, checkpoint payload, update count.
pub fn header_bits(q: &LatticeQuantizer, checkpoint: &CheckpointCode) -> u64 {
    let payload = match checkpoint {
        CheckpointCode::DictIndex(_) => 64,
        CheckpointCode::NewEntry(_) => 64 * q.dimension() as u64,
    };
    8 + 64 + 8 + payload + 64
}

/// Running reconstruction `X̃_t = checkpoint + (Σ indices) · s`, summed in integers so that client
/// and endorsers land on bit-identical states.
#[derive(Debug, Clone)]
pub struct Reconstructor {
    checkpoint: StateVector,
    sum: Vec<i64>,
}

impl Reconstructor {
    pub fn new(checkpoint: StateVector) -> Self {
        let d = checkpoint.dim();
        Reconstructor {
            checkpoint,
            sum: vec![0; d],
        }
    }

    fn state(&self, q: &LatticeQuantizer, sum: &[i64], level: u32) -> Option<StateVector> {
        let off = q.lattice_point(sum, level);
        StateVector::new(
            self.checkpoint
                .as_slice()
                .iter()
                .zip(off)
                .map(|(c, o)| c + o)
                .collect(),
        )
        .ok()
    }

    /// The current reported state.
    pub fn current(&self, q: &LatticeQuantizer) -> StateVector {
        self.state(q, &self.sum, 0)
            .unwrap_or_else(|| self.checkpoint.clone())
    }

    /// Adds a base-level update and returns the new reported state.
    pub fn advance(&mut self, q: &LatticeQuantizer, u: &QuantizedUpdate) -> Result<StateVector> {
        if u.indices.len() != self.sum.len() {
            return Err(Error::DimensionMismatch {
                expected: self.sum.len(),
                actual: u.indices.len(),
            });
        }
        self.sum
            .iter_mut()
            .zip(&u.indices)
            .for_each(|(s, i)| *s += i);
        self.state(q, &self.sum, 0)
            .ok_or(Error::NonFinite { index: 0 })
    }

    /// State reached by applying a refined update to the current state, without advancing.
    pub fn peek_refined(&self, q: &LatticeQuantizer, r: &QuantizedUpdate) -> Option<StateVector> {
        let sum: Vec<i64> = self
            .sum
            .iter()
            .zip(&r.indices)
            .map(|(s, i)| (s << r.level) + i)
            .collect();
        self.state(q, &sum, r.level)
    }
}

//! Lossy compression of state trajectories.

pub mod bits;
mod dictionary;
mod frame;
mod quantizer;

pub use self::dictionary::{CheckpointCode, CheckpointDictionary};
pub use self::frame::{header_bits, Bitstream, Frame, Reconstructor, FRAME_MAGIC};
pub use self::quantizer::{LatticeQuantizer, QuantizedUpdate, RefinementChunk, UpdateRef};

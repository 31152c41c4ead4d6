//! Trusted iterative computation: clients report compressed state trajectories, endorsers
//! validate them by recomputation, and an append-only chain keeps subsampled audits.
// `!(x > 0.0)` is used on purpose so NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codec;
pub mod compute;
pub mod error;
pub mod experiment;
pub mod ledger;
pub mod netsim;
pub mod protocol;

pub use error::{Error, Result};

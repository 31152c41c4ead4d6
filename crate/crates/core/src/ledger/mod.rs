//! Append-only audit storage and verification.

mod audit;
mod chain;
mod verify;

pub use self::audit::{
    choose_subsample_period, subsample_frame, subsample_period, Audit, AuditKind, Payload,
    PeriodRule,
};
pub use self::chain::{
    hash_hex, parse_hash_hex, verify_chain_bytes, AuditChain, Block, BlockHeader, Hash,
    IntegrityReport, GENESIS_HASH, HEADER_BITS,
};
pub use self::verify::{verify_computation, AuditCheck, VerificationReport};

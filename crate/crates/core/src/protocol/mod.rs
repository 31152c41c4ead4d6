//! Client, endorser and orderer roles.

pub mod bounds;
mod client;
mod config;
mod endorser;
mod invalidation;
mod orderer;
mod randomized;

pub use self::bounds::{
    detection_threshold, deviation_probability_bound, frame_size_lower_bound, max_quantizer_error,
    required_endorsers, verification_bound,
};
pub use self::client::{client_run_frames, ClientRun, FrameClosure};
pub use self::config::{ProtocolMode, RandomizedConfig, ToleranceSchedule, ValidationConfig};
pub use self::endorser::{
    endorse_bitstream, endorse_frame, validate_trajectory, Endorsement, TrajectoryCheck, Verdict,
};
pub use self::invalidation::{
    handle_invalidation, InvalidationAction, InvalidationContext, InvalidationNotice,
    RefinementPolicy,
};
pub use self::orderer::{assign_endorsers, FrameStatus, OrderingBuffer};
pub use self::randomized::{covariance_top_eigenvalue, randomized_endorse, RandomizedVerdict};

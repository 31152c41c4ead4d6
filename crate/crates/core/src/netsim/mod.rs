//! Deterministic message passing between the protocol roles, with cost accounting.

mod cost;
mod network;
mod session;

pub use self::cost::{
    measured_vs_predicted, predicted_cost, CostComparison, CostLedger, ModeParams, PredictedCost,
    Role,
};
pub use self::network::{Delivery, Envelope, MessageKind, Network, NodeId};
pub use self::session::{run_session, SessionConfig, SessionOutcome, CLIENT_NODE};

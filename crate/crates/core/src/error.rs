use thiserror::Error;

use crate::graph::{NodeId, ValidationReport};

pub type Result<T> = std::result::Result<T, OffloadError>;

#[derive(Debug, Error)]
pub enum OffloadError {
    #[error("malformed graph: {0}")]
    MalformedGraph(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(ValidationReport),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("unknown node id {0}")]
    UnknownNode(NodeId),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("latency is +inf: zero-power uplink on edge {from}-{to}")]
    ZeroPowerEdge { from: NodeId, to: NodeId },

    #[error("power interval [{lo}, {hi}] is empty after clamping to the profile limits")]
    InfeasibleRegion { lo: f64, hi: f64 },

    #[error("required power {required} W exceeds the cap {cap} W")]
    ExceedsCap { required: f64, cap: f64 },

    #[error("no plan meets the deadline of {lmax} s")]
    InfeasibleDeadline { lmax: f64 },

    #[error("graph is not a call tree; use the general solver")]
    NotATree,

    #[error("unsupported structure: {0}")]
    UnsupportedStructure(String),

    #[error("schedule stalled after {steps} steps; stuck nodes: {stuck}")]
    StalledSchedule { steps: usize, stuck: String },

    #[error("enumeration limit exceeded: {count} free nodes > limit {limit}")]
    LimitExceeded { count: usize, limit: usize },

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl OffloadError {
    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            OffloadError::InfeasibleDeadline { .. }
            | OffloadError::InfeasibleRegion { .. }
            | OffloadError::ExceedsCap { .. }
            | OffloadError::ZeroPowerEdge { .. }
            | OffloadError::StalledSchedule { .. } => 2,
            OffloadError::NotATree | OffloadError::UnsupportedStructure(_) | OffloadError::LimitExceeded { .. } => 3,
            _ => 1,
        }
    }
}

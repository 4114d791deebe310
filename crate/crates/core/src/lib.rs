//! Joint offloading and uplink-power optimization for mobile applications
//! described as call graphs.

pub mod cli;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod io;
pub mod oracle;
pub mod phy;
pub mod parallel;
pub mod plan;
pub mod quant;
pub mod serial;
pub mod sim;
pub mod sweep;

pub use error::{OffloadError, Result};
pub use graph::{CallGraph, Edge, NodeId, TaskNode};
pub use phy::{ConcurrencyProfile, PlatformProfile};
pub use plan::{EnergyLatency, OffloadPlan};

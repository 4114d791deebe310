//! Built-in copies of the shipped fixtures plus small synthetic generators.

use crate::graph::{CallGraph, Edge, GraphFile, NodeId, TaskNode};
use crate::phy::{PlatformProfile, ProfileFile};

pub const FIG8_JSON: &str = include_str!("../../../fixtures/fig8.json");
pub const CHAIN3_JSON: &str = include_str!("../../../fixtures/chain3.json");
pub const T2SUBTREE_JSON: &str = include_str!("../../../fixtures/t2subtree.json");
pub const PAPER_PROFILE_JSON: &str = include_str!("../../../profiles/paper.json");

fn parse_graph(text: &str) -> CallGraph {
    let file: GraphFile = serde_json::from_str(text).expect("shipped fixture parses");
    CallGraph::from_file(file).expect("shipped fixture is well formed")
}

/// The 15-node reference graph: one data node (1), separators 2, 3, 4, root 15.
pub fn fig8() -> CallGraph {
    parse_graph(FIG8_JSON)
}

/// Data node 1 -> 2 -> 3 (root), 1e9 cycles at 2 and 3, 1e6 bits per edge.
pub fn chain3() -> CallGraph {
    parse_graph(CHAIN3_JSON)
}

/// The subtree {7, 8, 9, 11, 12, 14} of [`fig8`] renumbered 1..=6, with 7, 8
/// and 9 as data nodes and 14 as root.
pub fn t2subtree() -> CallGraph {
    parse_graph(T2SUBTREE_JSON)
}

pub fn paper_profile() -> PlatformProfile {
    let file: ProfileFile = serde_json::from_str(PAPER_PROFILE_JSON).expect("profile parses");
    PlatformProfile::from_file(&file).expect("profile is valid")
}

/// Data node 1 followed by `n - 1` compute tasks in a line; the last is the root.
pub fn chain(n: usize, cycles: f64, bits: f64) -> CallGraph {
    assert!(n >= 2, "a chain needs a data node and a root");
    let nodes = (0..n)
        .map(|i| TaskNode {
            id: NodeId::from_index(i),
            cycles: if i == 0 { 0.0 } else { cycles },
            is_data: i == 0,
        })
        .collect();
    let edges = (1..n)
        .map(|i| Edge { from: NodeId::from_index(i - 1), to: NodeId::from_index(i), bits })
        .collect();
    CallGraph::new(nodes, edges, NodeId::from_index(n - 1)).expect("chain is well formed")
}

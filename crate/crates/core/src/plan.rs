//! The joint decision variable: which tasks run remotely and at what power
//! each boundary edge is uploaded.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{OffloadError, Result};
use crate::graph::{CallGraph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLatency {
    /// J
    pub energy: f64,
    /// s
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OffloadPlan {
    /// `offloaded[i]` is the decision of node `i + 1`.
    pub offloaded: Vec<bool>,
    /// Uplink power per edge, W. Only edges from a local to an offloaded task
    /// are read.
    pub powers: BTreeMap<(NodeId, NodeId), f64>,
}

impl OffloadPlan {
    pub fn all_local(g: &CallGraph) -> Self {
        OffloadPlan { offloaded: vec![false; g.node_count()], powers: BTreeMap::new() }
    }

    pub fn from_decisions(offloaded: Vec<bool>) -> Self {
        OffloadPlan { offloaded, powers: BTreeMap::new() }
    }

    pub fn is_offloaded(&self, index: usize) -> bool {
        self.offloaded[index]
    }

    pub fn power(&self, from: NodeId, to: NodeId) -> Option<f64> {
        self.powers.get(&(from, to)).copied()
    }

    /// Edges whose data must cross the uplink: local parent, offloaded child.
    pub fn uplink_edges(&self, g: &CallGraph) -> Vec<usize> {
        (0..g.edges().len())
            .filter(|&e| {
                let edge = g.edge(e);
                !self.offloaded[edge.from.index()] && self.offloaded[edge.to.index()]
            })
            .collect()
    }

    /// Edges whose data must cross the downlink: offloaded parent, local child.
    pub fn downlink_edges(&self, g: &CallGraph) -> Vec<usize> {
        (0..g.edges().len())
            .filter(|&e| {
                let edge = g.edge(e);
                self.offloaded[edge.from.index()] && !self.offloaded[edge.to.index()]
            })
            .collect()
    }

    /// Keeps only the powers of uplink edges.
    pub fn prune_powers(&mut self, g: &CallGraph) {
        let keep: Vec<(NodeId, NodeId)> = self
            .uplink_edges(g)
            .into_iter()
            .map(|e| (g.edge(e).from, g.edge(e).to))
            .collect();
        self.powers.retain(|k, _| keep.contains(k));
    }

    /// Per-edge power vector indexed like `g.edges()`; 0 where unset.
    pub fn edge_powers(&self, g: &CallGraph) -> Vec<f64> {
        g.edges().iter().map(|e| self.power(e.from, e.to).unwrap_or(0.0)).collect()
    }

    /// One character per node in id order, `1` for offloaded.
    pub fn bitstring(&self) -> String {
        self.offloaded.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    /// Checks the plan against the graph: one decision per node, forced-local
    /// nodes kept local, every uplink edge carries a finite non-negative power,
    /// and no power refers to a missing edge.
    pub fn check(&self, g: &CallGraph) -> Result<()> {
        if self.offloaded.len() != g.node_count() {
            return Err(OffloadError::InvalidPlan(format!(
                "plan has {} decisions for {} nodes",
                self.offloaded.len(),
                g.node_count()
            )));
        }
        for i in 0..g.node_count() {
            if self.offloaded[i] && g.is_forced_local(i) {
                return Err(OffloadError::InvalidPlan(format!(
                    "node {} must run locally",
                    NodeId::from_index(i)
                )));
            }
        }
        for &(from, to) in self.powers.keys() {
            if g.edge_index(from, to).is_none() {
                return Err(OffloadError::InvalidPlan(format!("power given for missing edge {from}-{to}")));
            }
        }
        for e in self.uplink_edges(g) {
            let edge = g.edge(e);
            match self.power(edge.from, edge.to) {
                Some(p) if p.is_finite() && p >= 0.0 => {}
                Some(p) => {
                    return Err(OffloadError::InvalidPlan(format!(
                        "edge {}-{} has invalid power {p}",
                        edge.from, edge.to
                    )))
                }
                None => {
                    return Err(OffloadError::InvalidPlan(format!(
                        "edge {}-{} is uploaded but has no power",
                        edge.from, edge.to
                    )))
                }
            }
        }
        Ok(())
    }
}

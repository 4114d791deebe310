//! Call-graph model: tasks with CPU-cycle demands, edges carrying the bits a
//! parent hands to its child, a set of data (input-preparation) nodes pinned to
//! the mobile, and a single childless root.
//!
//! Node ids are dense integers `1..=|V|`. Internally every module addresses
//! nodes by their zero-based index (`id - 1`) and edges by their position in
//! [`CallGraph::edges`].

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{OffloadError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(index: usize) -> Self {
        NodeId(index as u32 + 1)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskNode {
    pub id: NodeId,
    /// CPU cycles needed to run the task.
    pub cycles: f64,
    pub is_data: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    /// Bits the parent must transfer so the child can run.
    pub bits: f64,
}

/// On-disk layout of a call graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub nodes: Vec<TaskNode>,
    pub edges: Vec<Edge>,
    pub root: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallGraph {
    nodes: Vec<TaskNode>,
    edges: Vec<Edge>,
    root: NodeId,
    parent_edges: Vec<Vec<usize>>,
    child_edges: Vec<Vec<usize>>,
    edge_lookup: BTreeMap<(NodeId, NodeId), usize>,
}

impl CallGraph {
    /// Builds the adjacency structure. Only referential problems (non-dense
    /// ids, dangling edge endpoints, unknown root) are rejected here; every
    /// other structural rule is reported by [`validate_graph`].
    pub fn new(mut nodes: Vec<TaskNode>, edges: Vec<Edge>, root: NodeId) -> Result<Self> {
        nodes.sort_by_key(|n| n.id);
        for (i, n) in nodes.iter().enumerate() {
            if n.id != NodeId::from_index(i) {
                return Err(OffloadError::MalformedGraph(format!(
                    "node ids must be exactly 1..={} (found {} at position {})",
                    nodes.len(),
                    n.id,
                    i + 1
                )));
            }
        }
        let n = nodes.len();
        let known = |id: NodeId| id.0 >= 1 && (id.0 as usize) <= n;
        if !known(root) {
            return Err(OffloadError::MalformedGraph(format!("root {root} is not a node")));
        }
        let mut parent_edges = vec![Vec::new(); n];
        let mut child_edges = vec![Vec::new(); n];
        let mut edge_lookup = BTreeMap::new();
        for (e, edge) in edges.iter().enumerate() {
            if !known(edge.from) || !known(edge.to) {
                return Err(OffloadError::MalformedGraph(format!(
                    "edge {}-{} references an unknown node",
                    edge.from, edge.to
                )));
            }
            parent_edges[edge.to.index()].push(e);
            child_edges[edge.from.index()].push(e);
            edge_lookup.entry((edge.from, edge.to)).or_insert(e);
        }
        // Deterministic neighbour order: ascending id of the other endpoint.
        for list in parent_edges.iter_mut() {
            list.sort_by_key(|&e| (edges[e].from, e));
        }
        for list in child_edges.iter_mut() {
            list.sort_by_key(|&e| (edges[e].to, e));
        }
        Ok(CallGraph { nodes, edges, root, parent_edges, child_edges, edge_lookup })
    }

    pub fn from_file(file: GraphFile) -> Result<Self> {
        CallGraph::new(file.nodes, file.edges, file.root)
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile { nodes: self.nodes.clone(), edges: self.edges.clone(), root: self.root }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[TaskNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, index: usize) -> &TaskNode {
        &self.nodes[index]
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn edge_index(&self, from: NodeId, to: NodeId) -> Option<usize> {
        self.edge_lookup.get(&(from, to)).copied()
    }

    /// Indices of the edges entering node `index`, ordered by parent id.
    pub fn parent_edges(&self, index: usize) -> &[usize] {
        &self.parent_edges[index]
    }

    /// Indices of the edges leaving node `index`, ordered by child id.
    pub fn child_edges(&self, index: usize) -> &[usize] {
        &self.child_edges[index]
    }

    pub fn is_data(&self, index: usize) -> bool {
        self.nodes[index].is_data
    }

    /// Data nodes and the root must run on the mobile.
    pub fn is_forced_local(&self, index: usize) -> bool {
        self.nodes[index].is_data || index == self.root.index()
    }

    /// Nodes whose offloading decision is free, in ascending id order.
    pub fn free_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&i| !self.is_forced_local(i)).collect()
    }

    pub fn total_cycles(&self) -> f64 {
        self.nodes.iter().map(|n| n.cycles).sum()
    }

    /// Returns `Err(InvalidGraph)` when [`validate_graph`] reports anything.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate_graph(self);
        if report.is_valid() {
            Ok(())
        } else {
            Err(OffloadError::InvalidGraph(report))
        }
    }

    pub(crate) fn topo_indices(&self) -> Result<Vec<usize>> {
        let n = self.node_count();
        let mut indegree: Vec<usize> = (0..n).map(|i| self.parent_edges[i].len()).collect();
        let mut ready: BinaryHeap<Reverse<usize>> =
            (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(i)) = ready.pop() {
            order.push(i);
            for &e in &self.child_edges[i] {
                let c = self.edges[e].to.index();
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
        if order.len() != n {
            let stuck: Vec<String> = (0..n)
                .filter(|&i| indegree[i] > 0)
                .map(|i| NodeId::from_index(i).to_string())
                .collect();
            return Err(OffloadError::MalformedGraph(format!(
                "cycle detected through nodes {}",
                stuck.join(",")
            )));
        }
        Ok(order)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    SelfLoop { node: NodeId },
    DuplicateEdge { from: NodeId, to: NodeId },
    Cycle { nodes: Vec<NodeId> },
    MultipleRoots { nodes: Vec<NodeId> },
    NoRoot,
    RootHasChildren { root: NodeId },
    RootIsData { root: NodeId },
    DataNodeHasParents { node: NodeId },
    DataNodeWithoutChildren { node: NodeId },
    MissingParents { node: NodeId },
    InvalidCycles { node: NodeId },
    InvalidBits { from: NodeId, to: NodeId },
}

fn join_ids(ids: &[NodeId]) -> String {
    ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SelfLoop { node } => write!(f, "self-loop on node {node}"),
            Violation::DuplicateEdge { from, to } => write!(f, "duplicate edge {from}-{to}"),
            Violation::Cycle { nodes } => write!(f, "cycle through nodes {}", join_ids(nodes)),
            Violation::MultipleRoots { nodes } => {
                write!(f, "multiple roots: childless nodes {}", join_ids(nodes))
            }
            Violation::NoRoot => write!(f, "no childless node"),
            Violation::RootHasChildren { root } => write!(f, "root {root} has children"),
            Violation::RootIsData { root } => write!(f, "root {root} is a data node"),
            Violation::DataNodeHasParents { node } => write!(f, "data node {node} has parents"),
            Violation::DataNodeWithoutChildren { node } => {
                write!(f, "data node {node} has no children")
            }
            Violation::MissingParents { node } => {
                write!(f, "non-data node {node} has no parents")
            }
            Violation::InvalidCycles { node } => {
                write!(f, "node {node} has negative or non-finite cycles")
            }
            Violation::InvalidBits { from, to } => {
                write!(f, "edge {from}-{to} must carry a positive finite number of bits")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Reports every violated structural rule; an empty report means the graph
/// satisfies all of them.
pub fn validate_graph(g: &CallGraph) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();
    for edge in g.edges() {
        if edge.from == edge.to {
            violations.push(Violation::SelfLoop { node: edge.from });
        } else if !seen.insert((edge.from, edge.to)) {
            violations.push(Violation::DuplicateEdge { from: edge.from, to: edge.to });
        }
        if !(edge.bits.is_finite() && edge.bits > 0.0) {
            violations.push(Violation::InvalidBits { from: edge.from, to: edge.to });
        }
    }
    for node in g.nodes() {
        if !(node.cycles.is_finite() && node.cycles >= 0.0) {
            violations.push(Violation::InvalidCycles { node: node.id });
        }
    }
    // Self-loops already break acyclicity; report them once.
    if !violations.iter().any(|v| matches!(v, Violation::SelfLoop { .. })) {
        if let Err(OffloadError::MalformedGraph(_)) = g.topo_indices() {
            violations.push(Violation::Cycle { nodes: cycle_members(g) });
        }
    }

    let childless: Vec<NodeId> = (0..g.node_count())
        .filter(|&i| g.child_edges(i).is_empty())
        .map(NodeId::from_index)
        .collect();
    match childless.len() {
        0 => violations.push(Violation::NoRoot),
        1 => {}
        _ => violations.push(Violation::MultipleRoots { nodes: childless.clone() }),
    }
    let root = g.root();
    if !g.child_edges(root.index()).is_empty() {
        violations.push(Violation::RootHasChildren { root });
    }
    if g.is_data(root.index()) {
        violations.push(Violation::RootIsData { root });
    }
    for i in 0..g.node_count() {
        let id = NodeId::from_index(i);
        let has_parents = !g.parent_edges(i).is_empty();
        if g.is_data(i) {
            if has_parents {
                violations.push(Violation::DataNodeHasParents { node: id });
            }
            if g.child_edges(i).is_empty() {
                violations.push(Violation::DataNodeWithoutChildren { node: id });
            }
        } else if !has_parents {
            violations.push(Violation::MissingParents { node: id });
        }
    }
    ValidationReport { violations }
}

fn cycle_members(g: &CallGraph) -> Vec<NodeId> {
    // Peel sources and sinks repeatedly; what remains lies on or between cycles.
    let n = g.node_count();
    let mut alive = vec![true; n];
    loop {
        let mut changed = false;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            let live_in = g.parent_edges(i).iter().any(|&e| alive[g.edge(e).from.index()]);
            let live_out = g.child_edges(i).iter().any(|&e| alive[g.edge(e).to.index()]);
            if !live_in || !live_out {
                alive[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..n).filter(|&i| alive[i]).map(NodeId::from_index).collect()
}

/// Parents before children, ties broken by ascending id.
pub fn topological_order(g: &CallGraph) -> Result<Vec<NodeId>> {
    Ok(g.topo_indices()?.into_iter().map(NodeId::from_index).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompositionReport {
    pub is_tree: bool,
    /// Nodes with two or more children.
    pub separators: BTreeSet<NodeId>,
    /// Weakly connected components left after removing the separators.
    pub components: Vec<BTreeSet<NodeId>>,
    pub forest_after_removal: bool,
}

pub fn decompose(g: &CallGraph) -> DecompositionReport {
    let n = g.node_count();
    let separators: BTreeSet<NodeId> = (0..n)
        .filter(|&i| g.child_edges(i).len() >= 2)
        .map(NodeId::from_index)
        .collect();
    let removed = |i: usize| separators.contains(&NodeId::from_index(i));

    let mut component_of = vec![usize::MAX; n];
    let mut components: Vec<BTreeSet<NodeId>> = Vec::new();
    for start in 0..n {
        if removed(start) || component_of[start] != usize::MAX {
            continue;
        }
        let c = components.len();
        let mut members = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        component_of[start] = c;
        while let Some(i) = queue.pop_front() {
            members.insert(NodeId::from_index(i));
            let neighbours = g
                .parent_edges(i)
                .iter()
                .map(|&e| g.edge(e).from.index())
                .chain(g.child_edges(i).iter().map(|&e| g.edge(e).to.index()));
            for j in neighbours {
                if !removed(j) && component_of[j] == usize::MAX {
                    component_of[j] = c;
                    queue.push_back(j);
                }
            }
        }
        components.push(members);
    }

    // A component is a call tree when it has exactly one internal sink and
    // every other member has exactly one internal child.
    let forest_after_removal = components.iter().all(|members| {
        let mut sinks = 0;
        for id in members {
            let internal_children = g
                .child_edges(id.index())
                .iter()
                .filter(|&&e| !removed(g.edge(e).to.index()))
                .count();
            match internal_children {
                0 => sinks += 1,
                1 => {}
                _ => return false,
            }
        }
        sinks == 1
    });

    DecompositionReport {
        is_tree: separators.is_empty(),
        separators,
        components,
        forest_after_removal,
    }
}

/// `set` together with every ancestor of its members.
pub fn ancestors_closure(g: &CallGraph, set: &BTreeSet<NodeId>) -> Result<BTreeSet<NodeId>> {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    for &id in set {
        if id.0 == 0 || id.index() >= n {
            return Err(OffloadError::UnknownNode(id));
        }
        if !seen[id.index()] {
            seen[id.index()] = true;
            queue.push_back(id.index());
        }
    }
    while let Some(i) = queue.pop_front() {
        for &e in g.parent_edges(i) {
            let p = g.edge(e).from.index();
            if !seen[p] {
                seen[p] = true;
                queue.push_back(p);
            }
        }
    }
    Ok((0..n).filter(|&i| seen[i]).map(NodeId::from_index).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn build(nodes: &[(u32, f64, bool)], edges: &[(u32, u32, f64)], root: u32) -> CallGraph {
        CallGraph::new(
            nodes
                .iter()
                .map(|&(id, cycles, is_data)| TaskNode { id: NodeId(id), cycles, is_data })
                .collect(),
            edges
                .iter()
                .map(|&(from, to, bits)| Edge { from: NodeId(from), to: NodeId(to), bits })
                .collect(),
            NodeId(root),
        )
        .unwrap()
    }

    fn ids(v: &[u32]) -> BTreeSet<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    #[test]
    fn fig8_is_valid() {
        let g = fixtures::fig8();
        assert_eq!(g.node_count(), 15);
        assert_eq!(g.edges().len(), 18);
        assert!(validate_graph(&g).is_valid());
    }

    #[test]
    fn self_loop_reported() {
        let g = build(
            &[(1, 0.0, true), (2, 1.0, false), (3, 1.0, false)],
            &[(1, 2, 1.0), (2, 2, 1.0), (2, 3, 1.0)],
            3,
        );
        let report = validate_graph(&g);
        assert!(report.violations.contains(&Violation::SelfLoop { node: NodeId(2) }));
        assert!(report.to_string().contains("self-loop"));
    }

    #[test]
    fn two_childless_nodes_reported() {
        let g = build(
            &[(1, 0.0, true), (2, 1.0, false), (3, 1.0, false)],
            &[(1, 2, 1.0), (1, 3, 1.0)],
            3,
        );
        let report = validate_graph(&g);
        assert!(report
            .violations
            .contains(&Violation::MultipleRoots { nodes: vec![NodeId(2), NodeId(3)] }));
        assert!(report.to_string().contains("multiple roots"));
    }

    #[test]
    fn structural_rules_reported() {
        let g = build(
            &[(1, 0.0, true), (2, -1.0, true), (3, 1.0, false), (4, 1.0, true)],
            &[(1, 2, 0.0), (2, 3, 1.0), (1, 3, 1.0), (1, 3, 2.0)],
            4,
        );
        let v = validate_graph(&g).violations;
        assert!(v.contains(&Violation::DataNodeHasParents { node: NodeId(2) }));
        assert!(v.contains(&Violation::InvalidCycles { node: NodeId(2) }));
        assert!(v.contains(&Violation::InvalidBits { from: NodeId(1), to: NodeId(2) }));
        assert!(v.contains(&Violation::DuplicateEdge { from: NodeId(1), to: NodeId(3) }));
        assert!(v.contains(&Violation::RootIsData { root: NodeId(4) }));
        assert!(v.contains(&Violation::DataNodeWithoutChildren { node: NodeId(4) }));
    }

    #[test]
    fn cycle_reported() {
        let g = build(
            &[(1, 0.0, true), (2, 1.0, false), (3, 1.0, false), (4, 1.0, false)],
            &[(1, 2, 1.0), (2, 3, 1.0), (3, 2, 1.0), (3, 4, 1.0)],
            4,
        );
        let v = validate_graph(&g).violations;
        assert!(v.contains(&Violation::Cycle { nodes: vec![NodeId(2), NodeId(3)] }));
        assert!(topological_order(&g).is_err());
    }

    #[test]
    fn malformed_ids_rejected() {
        let err = CallGraph::new(
            vec![TaskNode { id: NodeId(2), cycles: 0.0, is_data: true }],
            vec![],
            NodeId(2),
        );
        assert!(matches!(err, Err(OffloadError::MalformedGraph(_))));
        let err = CallGraph::new(
            vec![TaskNode { id: NodeId(1), cycles: 0.0, is_data: true }],
            vec![Edge { from: NodeId(1), to: NodeId(5), bits: 1.0 }],
            NodeId(1),
        );
        assert!(matches!(err, Err(OffloadError::MalformedGraph(_))));
    }

    #[test]
    fn topological_orders() {
        let chain = fixtures::chain3();
        assert_eq!(topological_order(&chain).unwrap(), vec![NodeId(1), NodeId(2), NodeId(3)]);

        let diamond = build(
            &[(1, 0.0, true), (2, 1.0, false), (3, 1.0, false), (4, 1.0, false)],
            &[(1, 3, 1.0), (1, 2, 1.0), (3, 4, 1.0), (2, 4, 1.0)],
            4,
        );
        assert_eq!(
            topological_order(&diamond).unwrap(),
            vec![NodeId(1), NodeId(2), NodeId(3), NodeId(4)]
        );

        let order = topological_order(&fixtures::fig8()).unwrap();
        assert_eq!(order.first(), Some(&NodeId(1)));
        assert_eq!(order.last(), Some(&NodeId(15)));
    }

    #[test]
    fn fig8_decomposition() {
        let report = decompose(&fixtures::fig8());
        assert_eq!(report.separators, ids(&[2, 3, 4]));
        assert!(!report.is_tree);
        assert!(report.forest_after_removal);
        assert_eq!(report.components.len(), 2);
        assert_eq!(report.components[0], ids(&[1]));
        assert_eq!(report.components[1].len(), 11);
    }

    #[test]
    fn tree_decompositions() {
        for g in [fixtures::t2subtree(), fixtures::chain3()] {
            let report = decompose(&g);
            assert!(report.is_tree);
            assert!(report.separators.is_empty());
            assert!(report.forest_after_removal);
            assert_eq!(report.components.len(), 1);
            assert_eq!(report.components[0].len(), g.node_count());
        }
    }

    #[test]
    fn ancestor_closures() {
        let g = fixtures::fig8();
        assert_eq!(ancestors_closure(&g, &ids(&[2, 3, 4])).unwrap(), ids(&[1, 2, 3, 4]));
        let all: BTreeSet<NodeId> = (1..=15).map(NodeId).collect();
        assert_eq!(ancestors_closure(&g, &ids(&[15])).unwrap(), all);
        assert!(ancestors_closure(&g, &BTreeSet::new()).unwrap().is_empty());
        assert!(matches!(
            ancestors_closure(&g, &ids(&[99])),
            Err(OffloadError::UnknownNode(NodeId(99)))
        ));
    }

    #[test]
    fn ancestor_closure_matches_reversed_bfs_oracle() {
        // Oracle: repeated relaxation over the edge list until a fixed point.
        let g = fixtures::fig8();
        for seed in 1..=15u32 {
            let mut reach: BTreeSet<NodeId> = ids(&[seed]);
            loop {
                let before = reach.len();
                for e in g.edges() {
                    if reach.contains(&e.to) {
                        reach.insert(e.from);
                    }
                }
                if reach.len() == before {
                    break;
                }
            }
            assert_eq!(ancestors_closure(&g, &ids(&[seed])).unwrap(), reach);
        }
    }
}

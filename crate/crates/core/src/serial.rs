//! Serial execution: exact evaluation of energy and latency, factorization of
//! the weighted objective E + lambda L over task nodes, and its exact
//! minimization by min-sum message passing (trees) or by enumerating the
//! separator decisions and passing messages on the residual trees.

use rayon::prelude::*;

use crate::error::{OffloadError, Result};
use crate::graph::{decompose, CallGraph, NodeId};
use crate::phy::{optimal_serial_power, required_power, PlatformProfile};
use crate::plan::{EnergyLatency, OffloadPlan};

/// Largest number of free separators the general solver will enumerate.
pub const MAX_FREE_SEPARATORS: usize = 24;

/// Energy and latency of a plan when every operation runs one after another.
pub fn evaluate_serial(g: &CallGraph, prof: &PlatformProfile, plan: &OffloadPlan) -> Result<EnergyLatency> {
    plan.check(g)?;
    let mut energy = 0.0;
    let mut latency = 0.0;
    for (i, node) in g.nodes().iter().enumerate() {
        if plan.is_offloaded(i) {
            latency += prof.remote_time(node.cycles);
        } else {
            let t = prof.local_time(node.cycles);
            latency += t;
            energy += prof.p_local * t;
        }
    }
    for e in plan.uplink_edges(g) {
        let edge = g.edge(e);
        let p = plan.power(edge.from, edge.to).unwrap_or(0.0);
        let rate = prof.uplink_rate(p);
        if !(rate > 0.0) {
            return Err(OffloadError::ZeroPowerEdge { from: edge.from, to: edge.to });
        }
        let t = edge.bits / rate;
        latency += t;
        energy += (p + prof.p_rf) * t;
    }
    for e in plan.downlink_edges(g) {
        let t = g.edge(e).bits / prof.c_dl;
        latency += t;
        energy += (prof.p_rf + prof.p_rx) * t;
    }
    Ok(EnergyLatency { energy, latency })
}

/// Per-node and per-edge parts of the weighted objective with powers fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct SerialFactors {
    pub lambda: f64,
    /// `[local, remote]` compute cost of each node.
    pub node_terms: Vec<[f64; 2]>,
    /// Transfer cost of each edge indexed `[I_parent][I_child]`.
    pub edge_terms: Vec<[[f64; 2]; 2]>,
    /// Uplink power assumed on each edge, W.
    pub powers: Vec<f64>,
    pub degenerate_power: bool,
}

/// Factors with the common optimal uplink power on every edge.
pub fn build_factors(g: &CallGraph, prof: &PlatformProfile, lambda: f64) -> Result<SerialFactors> {
    let sp = optimal_serial_power(prof, lambda)?;
    let powers = vec![sp.power; g.edges().len()];
    let mut f = build_factors_with_powers(g, prof, lambda, &powers)?;
    f.degenerate_power = sp.degenerate;
    Ok(f)
}

/// Factors with caller-chosen per-edge powers (indexed like `g.edges()`).
pub fn build_factors_with_powers(
    g: &CallGraph,
    prof: &PlatformProfile,
    lambda: f64,
    powers: &[f64],
) -> Result<SerialFactors> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(OffloadError::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    if powers.len() != g.edges().len() {
        return Err(OffloadError::InvalidArgument("one power per edge expected".into()));
    }
    let node_terms = g
        .nodes()
        .iter()
        .map(|n| {
            [
                (prof.p_local + lambda) * prof.local_time(n.cycles),
                lambda * prof.remote_time(n.cycles),
            ]
        })
        .collect();
    let edge_terms = g
        .edges()
        .iter()
        .zip(powers)
        .map(|(edge, &p)| {
            let rate = prof.uplink_rate(p);
            let up = if rate > 0.0 {
                (p + prof.p_rf + lambda) * (edge.bits / rate)
            } else {
                f64::INFINITY
            };
            let down = (prof.p_rf + prof.p_rx + lambda) * (edge.bits / prof.c_dl);
            [[0.0, up], [down, 0.0]]
        })
        .collect();
    Ok(SerialFactors {
        lambda,
        node_terms,
        edge_terms,
        powers: powers.to_vec(),
        degenerate_power: false,
    })
}

impl SerialFactors {
    /// Sum of all factors at a full assignment.
    pub fn total(&self, g: &CallGraph, offloaded: &[bool]) -> f64 {
        let nodes: f64 = self
            .node_terms
            .iter()
            .zip(offloaded)
            .map(|(t, &x)| t[usize::from(x)])
            .sum();
        let edges: f64 = g
            .edges()
            .iter()
            .zip(&self.edge_terms)
            .map(|(e, t)| t[usize::from(offloaded[e.from.index()])][usize::from(offloaded[e.to.index()])])
            .sum();
        nodes + edges
    }

    /// Plan for an assignment, carrying the factor powers on uplink edges.
    pub fn plan_for(&self, g: &CallGraph, offloaded: Vec<bool>) -> OffloadPlan {
        let mut plan = OffloadPlan::from_decisions(offloaded);
        for e in plan.uplink_edges(g) {
            let edge = g.edge(e);
            plan.powers.insert((edge.from, edge.to), self.powers[e]);
        }
        plan
    }
}

/// Min-sum messages with some variables clamped. Every unclamped node may
/// have at most one unclamped child, so the unclamped part is a forest of
/// in-trees. Returns the exact minimum and a minimizing assignment.
pub fn min_sum_clamped(
    g: &CallGraph,
    f: &SerialFactors,
    clamp: &[Option<bool>],
) -> Result<(f64, Vec<bool>)> {
    let topo = g.topo_indices()?;
    min_sum_with_order(g, f, clamp, &topo)
}

fn min_sum_with_order(
    g: &CallGraph,
    f: &SerialFactors,
    clamp: &[Option<bool>],
    topo: &[usize],
) -> Result<(f64, Vec<bool>)> {
    let n = g.node_count();
    let mut msg = vec![[0.0f64; 2]; n];
    // choice[e][x]: best decision of the parent of edge e when its child is x.
    let mut choice = vec![[false; 2]; g.edges().len()];
    let mut constant = 0.0;
    let mut sinks = Vec::new();

    for &v in topo {
        if let Some(cv) = clamp[v] {
            if cv && g.is_forced_local(v) {
                return Err(OffloadError::InvalidPlan(format!(
                    "node {} must run locally",
                    NodeId::from_index(v)
                )));
            }
            constant += f.node_terms[v][usize::from(cv)];
            for &e in g.parent_edges(v) {
                if let Some(cm) = clamp[g.edge(e).from.index()] {
                    constant += f.edge_terms[e][usize::from(cm)][usize::from(cv)];
                }
            }
            continue;
        }
        let free_children = g
            .child_edges(v)
            .iter()
            .filter(|&&e| clamp[g.edge(e).to.index()].is_none())
            .count();
        if free_children > 1 {
            return Err(OffloadError::UnsupportedStructure(format!(
                "node {} has {free_children} unclamped children",
                NodeId::from_index(v)
            )));
        }
        if free_children == 0 {
            sinks.push(v);
        }
        for x in 0..2 {
            if x == 1 && g.is_forced_local(v) {
                msg[v][1] = f64::INFINITY;
                continue;
            }
            let mut acc = f.node_terms[v][x];
            for &e in g.parent_edges(v) {
                let m = g.edge(e).from.index();
                match clamp[m] {
                    Some(cm) => acc += f.edge_terms[e][usize::from(cm)][x],
                    None => {
                        let stay = msg[m][0] + f.edge_terms[e][0][x];
                        let moved = msg[m][1] + f.edge_terms[e][1][x];
                        if moved < stay {
                            acc += moved;
                            choice[e][x] = true;
                        } else {
                            acc += stay;
                            choice[e][x] = false;
                        }
                    }
                }
            }
            for &e in g.child_edges(v) {
                if let Some(cc) = clamp[g.edge(e).to.index()] {
                    acc += f.edge_terms[e][x][usize::from(cc)];
                }
            }
            msg[v][x] = acc;
        }
    }

    let mut assignment: Vec<bool> = clamp.iter().map(|c| c.unwrap_or(false)).collect();
    let mut objective = constant;
    for &s in &sinks {
        let remote = msg[s][1] < msg[s][0];
        assignment[s] = remote;
        objective += msg[s][usize::from(remote)];
    }
    for &v in topo.iter().rev() {
        if clamp[v].is_some() {
            continue;
        }
        let x = usize::from(assignment[v]);
        for &e in g.parent_edges(v) {
            let m = g.edge(e).from.index();
            if clamp[m].is_none() {
                assignment[m] = choice[e][x];
            }
        }
    }
    Ok((objective, assignment))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerialSolution {
    pub plan: OffloadPlan,
    /// Minimum of E + lambda L.
    pub objective: f64,
    pub degenerate_power: bool,
}

/// Exact minimizer of E + lambda L on a call tree.
pub fn solve_serial_tree(g: &CallGraph, prof: &PlatformProfile, lambda: f64) -> Result<SerialSolution> {
    g.ensure_valid()?;
    if !decompose(g).is_tree {
        return Err(OffloadError::NotATree);
    }
    let f = build_factors(g, prof, lambda)?;
    let (objective, assignment) = min_sum_clamped(g, &f, &vec![None; g.node_count()])?;
    Ok(SerialSolution {
        plan: f.plan_for(g, assignment),
        objective,
        degenerate_power: f.degenerate_power,
    })
}

/// Exact minimizer of E + lambda L on a call graph whose separators split it
/// into trees.
pub fn solve_serial_general(g: &CallGraph, prof: &PlatformProfile, lambda: f64) -> Result<SerialSolution> {
    g.ensure_valid()?;
    let f = build_factors(g, prof, lambda)?;
    let (objective, assignment) = minimize_factors(g, &f)?;
    Ok(SerialSolution {
        plan: f.plan_for(g, assignment),
        objective,
        degenerate_power: f.degenerate_power,
    })
}

/// Exact minimum of a factorization over all feasible assignments.
pub fn minimize_factors(g: &CallGraph, f: &SerialFactors) -> Result<(f64, Vec<bool>)> {
    let report = decompose(g);
    if !report.forest_after_removal {
        return Err(OffloadError::UnsupportedStructure(
            "residual components are not trees (junction trees are not supported)".into(),
        ));
    }
    let topo = g.topo_indices()?;
    let mut clamp: Vec<Option<bool>> = vec![None; g.node_count()];
    let mut free = Vec::new();
    for id in &report.separators {
        let i = id.index();
        if g.is_forced_local(i) {
            clamp[i] = Some(false);
        } else {
            free.push(i);
        }
    }
    if free.len() > MAX_FREE_SEPARATORS {
        return Err(OffloadError::LimitExceeded { count: free.len(), limit: MAX_FREE_SEPARATORS });
    }
    let mut best: Option<(f64, Vec<bool>)> = None;
    for mask in 0u64..(1u64 << free.len()) {
        for (bit, &i) in free.iter().enumerate() {
            clamp[i] = Some(mask >> bit & 1 == 1);
        }
        let (value, assignment) = min_sum_with_order(g, f, &clamp, &topo)?;
        if best.as_ref().map_or(true, |(b, _)| value < *b) {
            best = Some((value, assignment));
        }
    }
    Ok(best.expect("at least one separator assignment"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaPoint {
    pub lambda: f64,
    pub energy: f64,
    pub latency: f64,
    pub plan: OffloadPlan,
}

/// One exact solve per lambda, each evaluated on the returned plan.
pub fn sweep_lambda(g: &CallGraph, prof: &PlatformProfile, lambdas: &[f64]) -> Result<Vec<LambdaPoint>> {
    if lambdas.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(OffloadError::InvalidArgument("lambdas must be sorted ascending".into()));
    }
    lambdas
        .par_iter()
        .map(|&lambda| {
            let sol = solve_serial_general(g, prof, lambda)?;
            let el = evaluate_serial(g, prof, &sol.plan)?;
            Ok(LambdaPoint { lambda, energy: el.energy, latency: el.latency, plan: sol.plan })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparateDesign {
    pub plan: OffloadPlan,
    pub energy: f64,
    pub latency: f64,
    /// Edges whose power hit the cap (including those whose receiving task
    /// needs no local time).
    pub capped_edges: Vec<(NodeId, NodeId)>,
}

/// Baseline uplink powers: the smallest power that uploads the edge in no
/// more time than the receiving task would need locally, capped at p_max.
pub fn separate_design_powers(g: &CallGraph, prof: &PlatformProfile) -> (Vec<f64>, Vec<(NodeId, NodeId)>) {
    let mut capped = Vec::new();
    let powers = g
        .edges()
        .iter()
        .map(|edge| {
            let t = prof.local_time(g.node(edge.to.index()).cycles);
            let p = if t > 0.0 { required_power(edge.bits, t, prof, 1) } else { f64::INFINITY };
            if p > prof.p_max {
                capped.push((edge.from, edge.to));
                prof.p_max
            } else {
                p.max(prof.p_min)
            }
        })
        .collect();
    (powers, capped)
}

/// Separate design with decisions chosen for minimum energy.
pub fn separate_design_serial(g: &CallGraph, prof: &PlatformProfile) -> Result<SeparateDesign> {
    separate_design_serial_weighted(g, prof, 0.0)
}

/// Separate design with decisions chosen for E + lambda L under frozen powers.
pub fn separate_design_serial_weighted(
    g: &CallGraph,
    prof: &PlatformProfile,
    lambda: f64,
) -> Result<SeparateDesign> {
    g.ensure_valid()?;
    let (powers, capped_edges) = separate_design_powers(g, prof);
    let f = build_factors_with_powers(g, prof, lambda, &powers)?;
    let (_, assignment) = minimize_factors(g, &f)?;
    let plan = f.plan_for(g, assignment);
    let el = evaluate_serial(g, prof, &plan)?;
    Ok(SeparateDesign { plan, energy: el.energy, latency: el.latency, capped_edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{chain3, fig8, paper_profile, t2subtree};
    use crate::graph::{Edge, TaskNode};
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        if a == b {
            0.0
        } else {
            ((a - b) / b).abs()
        }
    }

    /// Independent exhaustive minimum for the unit tests.
    fn exhaustive(g: &CallGraph, f: &SerialFactors) -> f64 {
        let free = g.free_nodes();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << free.len()) {
            let mut x = vec![false; g.node_count()];
            for (b, &i) in free.iter().enumerate() {
                x[i] = mask >> b & 1 == 1;
            }
            best = best.min(f.total(g, &x));
        }
        best
    }

    #[test]
    fn chain_all_local() {
        let g = chain3();
        let el = evaluate_serial(&g, &paper_profile(), &OffloadPlan::all_local(&g)).unwrap();
        assert!(rel(el.energy, 0.8) < 1e-15);
        assert!(rel(el.latency, 2.0) < 1e-15);
    }

    #[test]
    fn chain_with_offload() {
        let g = chain3();
        let prof = paper_profile();
        let mut plan = OffloadPlan::from_decisions(vec![false, true, false]);
        plan.powers.insert((NodeId(1), NodeId(2)), 0.5);
        let el = evaluate_serial(&g, &prof, &plan).unwrap();
        let up = 1e6 / prof.uplink_rate(0.5);
        assert!(rel(el.latency, up + 0.1 + 1e6 / 200e6 + 1.0) < 1e-15);
        assert!(rel(el.latency, 1.230_393) < 1e-6);
        assert!(rel(el.energy, 0.5 * up + 0.4) < 1e-15);
        assert!(rel(el.energy, 0.462_697) < 1e-5);

        plan.powers.insert((NodeId(1), NodeId(2)), 0.0);
        assert!(matches!(
            evaluate_serial(&g, &prof, &plan),
            Err(OffloadError::ZeroPowerEdge { .. })
        ));
    }

    #[test]
    fn fig8_all_local() {
        let g = fig8();
        let el = evaluate_serial(&g, &paper_profile(), &OffloadPlan::all_local(&g)).unwrap();
        assert!(rel(el.latency, 13.5) < 1e-12);
        assert!(rel(el.energy, 5.4) < 1e-12);
    }

    #[test]
    fn factor_reconstruction_matches_evaluation() {
        let g = fig8();
        let prof = paper_profile();
        let lambda = 0.3;
        let f = build_factors(&g, &prof, lambda).unwrap();
        let free = g.free_nodes();
        let mut state = 0x2545_f491_4f6c_dd1du64;
        for _ in 0..100 {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let mut x = vec![false; g.node_count()];
            for (b, &i) in free.iter().enumerate() {
                x[i] = state >> b & 1 == 1;
            }
            let plan = f.plan_for(&g, x.clone());
            let el = evaluate_serial(&g, &prof, &plan).unwrap();
            assert!(rel(f.total(&g, &x), el.energy + lambda * el.latency) < 1e-9);
        }
    }

    #[test]
    fn degenerate_flag_propagates() {
        let g = chain3();
        let f = build_factors(&g, &paper_profile(), 0.0).unwrap();
        assert!(f.degenerate_power);
        assert_eq!(f.edge_terms[0][0][1], f64::INFINITY);
        let sol = solve_serial_tree(&g, &paper_profile(), 0.0).unwrap();
        assert!(sol.degenerate_power);
        assert!(sol.plan.offloaded.iter().all(|&b| !b));
    }

    #[test]
    fn data_node_without_cycles_has_zero_local_term() {
        let f = build_factors(&fig8(), &paper_profile(), 2.0).unwrap();
        assert_eq!(f.node_terms[0][0], 0.0);
    }

    #[test]
    fn huge_transfers_keep_everything_local() {
        let g = chain3();
        let mut file = g.to_file();
        for e in &mut file.edges {
            e.bits = 1e12;
        }
        let g = CallGraph::from_file(file).unwrap();
        let sol = solve_serial_tree(&g, &paper_profile(), 0.01).unwrap();
        assert_eq!(sol.plan.bitstring(), "000");
    }

    #[test]
    fn forced_two_node_graph() {
        let g = CallGraph::new(
            vec![
                TaskNode { id: NodeId(1), cycles: 5e8, is_data: true },
                TaskNode { id: NodeId(2), cycles: 2e9, is_data: false },
            ],
            vec![Edge { from: NodeId(1), to: NodeId(2), bits: 1e6 }],
            NodeId(2),
        )
        .unwrap();
        let prof = paper_profile();
        let sol = solve_serial_tree(&g, &prof, 1.5).unwrap();
        assert_eq!(sol.plan.bitstring(), "00");
        assert!(rel(sol.objective, (0.4 + 1.5) * 2.5) < 1e-15);
    }

    #[test]
    fn tree_solver_rejects_graphs() {
        assert!(matches!(
            solve_serial_tree(&fig8(), &paper_profile(), 1.0),
            Err(OffloadError::NotATree)
        ));
    }

    #[test]
    fn tree_solver_matches_exhaustive_and_general() {
        let g = t2subtree();
        let prof = paper_profile();
        for &lambda in &[0.001, 0.05, 0.3, 1.0, 5.0] {
            let tree = solve_serial_tree(&g, &prof, lambda).unwrap();
            let general = solve_serial_general(&g, &prof, lambda).unwrap();
            assert_eq!(tree, general);
            let f = build_factors(&g, &prof, lambda).unwrap();
            assert!(rel(tree.objective, exhaustive(&g, &f)) < 1e-12);
            let el = evaluate_serial(&g, &prof, &tree.plan).unwrap();
            assert!(rel(tree.objective, el.energy + lambda * el.latency) < 1e-9);
        }
    }

    #[test]
    fn general_solver_matches_exhaustive_on_fig8() {
        let g = fig8();
        let prof = paper_profile();
        for &lambda in &[0.01, 0.1, 1.0, 10.0] {
            let sol = solve_serial_general(&g, &prof, lambda).unwrap();
            let f = build_factors(&g, &prof, lambda).unwrap();
            assert!(rel(sol.objective, exhaustive(&g, &f)) < 1e-12);
            // Clamping every node to the answer reproduces the objective.
            let clamp: Vec<Option<bool>> = sol.plan.offloaded.iter().map(|&b| Some(b)).collect();
            let (again, _) = min_sum_clamped(&g, &f, &clamp).unwrap();
            assert!(rel(again, sol.objective) < 1e-12);
        }
    }

    #[test]
    fn zero_bits_give_independent_choices() {
        let g = fig8();
        let prof = paper_profile();
        let mut file = g.to_file();
        for e in &mut file.edges {
            e.bits = 0.0;
        }
        let g0 = CallGraph::from_file(file).unwrap();
        let lambda = 0.7;
        let f = build_factors(&g0, &prof, lambda).unwrap();
        let (value, _) = minimize_factors(&g0, &f).unwrap();
        let expected: f64 = (0..g0.node_count())
            .map(|i| {
                let v = g0.node(i).cycles;
                let local = (prof.p_local + lambda) * v / prof.f_local;
                if g0.is_forced_local(i) {
                    local
                } else {
                    local.min(lambda * v / prof.f_remote)
                }
            })
            .sum();
        assert!(rel(value, expected) < 1e-12);
    }

    #[test]
    fn sweep_is_monotone() {
        let lambdas: Vec<f64> = (0..50).map(|i| 10f64.powf(-3.0 + 4.0 * i as f64 / 49.0)).collect();
        let pts = sweep_lambda(&fig8(), &paper_profile(), &lambdas).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].latency <= w[0].latency * (1.0 + 1e-12));
            assert!(w[1].energy >= w[0].energy * (1.0 - 1e-12));
        }
        assert!(sweep_lambda(&fig8(), &paper_profile(), &[1.0, 0.5]).is_err());
    }

    #[test]
    fn separate_design_power_value() {
        let g = chain3();
        let prof = paper_profile();
        let (powers, capped) = separate_design_powers(&g, &prof);
        assert!(capped.is_empty());
        assert!(rel(powers[0], 1.0 / 10f64.powf(2.7)) < 1e-12);
        assert!((powers[0] - 2.0e-3).abs() < 1e-4);
    }

    #[test]
    fn separate_design_caps_zero_time_tasks() {
        let g = CallGraph::new(
            vec![
                TaskNode { id: NodeId(1), cycles: 0.0, is_data: true },
                TaskNode { id: NodeId(2), cycles: 0.0, is_data: false },
                TaskNode { id: NodeId(3), cycles: 1e9, is_data: false },
            ],
            vec![
                Edge { from: NodeId(1), to: NodeId(2), bits: 1e6 },
                Edge { from: NodeId(2), to: NodeId(3), bits: 1e6 },
            ],
            NodeId(3),
        )
        .unwrap();
        let prof = paper_profile();
        let (powers, capped) = separate_design_powers(&g, &prof);
        assert_eq!(powers[0], prof.p_max);
        assert_eq!(capped, vec![(NodeId(1), NodeId(2))]);
    }

    #[test]
    fn separate_design_never_beats_joint() {
        let g = fig8();
        let prof = paper_profile();
        for &lambda in &[0.0, 0.01, 0.1, 1.0, 10.0] {
            let base = separate_design_serial_weighted(&g, &prof, lambda).unwrap();
            let joint = if lambda > 0.0 {
                solve_serial_general(&g, &prof, lambda).unwrap().objective
            } else {
                // Energy-only: the joint optimum is an infimum approached at
                // vanishing power; compare against a small positive weight.
                let sol = solve_serial_general(&g, &prof, 1e-9).unwrap();
                evaluate_serial(&g, &prof, &sol.plan).unwrap().energy
            };
            let obj = base.energy + lambda * base.latency;
            assert!(joint <= obj * (1.0 + 1e-9), "lambda={lambda}: {joint} > {obj}");
        }
    }

    #[test]
    fn separate_design_keeps_heavy_graph_local() {
        let g = chain3();
        let mut file = g.to_file();
        for e in &mut file.edges {
            e.bits = 1e9;
        }
        let g = CallGraph::from_file(file).unwrap();
        let base = separate_design_serial(&g, &paper_profile()).unwrap();
        assert_eq!(base.plan.bitstring(), "000");
    }

    fn random_graph() -> impl Strategy<Value = CallGraph> {
        // Random in-forests joined at a root, with extra edges out of a few
        // nodes to create separators.
        (4usize..12, proptest::collection::vec((0.0f64..3e9, 1e5f64..2e7, 0usize..1000, any::<bool>()), 12))
            .prop_map(|(n, spec)| {
                let mut nodes = Vec::new();
                let mut edges = Vec::new();
                for i in 0..n {
                    let (cycles, _, _, _) = spec[i];
                    nodes.push(TaskNode { id: NodeId::from_index(i), cycles, is_data: i == 0 });
                }
                for i in 1..n {
                    let (_, bits, pick, extra) = spec[i];
                    let parent = pick % i;
                    edges.push(Edge { from: NodeId::from_index(parent), to: NodeId::from_index(i), bits });
                    if extra && i >= 2 {
                        let second = (pick / 7) % i;
                        if second != parent {
                            edges.push(Edge {
                                from: NodeId::from_index(second),
                                to: NodeId::from_index(i),
                                bits: bits * 0.5,
                            });
                        }
                    }
                }
                // Every childless non-root node feeds the root.
                let root = n - 1;
                let mut has_child = vec![false; n];
                for e in &edges {
                    has_child[e.from.index()] = true;
                }
                for i in 0..root {
                    if !has_child[i] {
                        edges.push(Edge { from: NodeId::from_index(i), to: NodeId::from_index(root), bits: 1e6 });
                    }
                }
                CallGraph::new(nodes, edges, NodeId::from_index(root)).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn general_solver_is_exact(g in random_graph(), lambda in 0.001f64..20.0) {
            let prof = paper_profile();
            prop_assume!(decompose(&g).forest_after_removal);
            let sol = solve_serial_general(&g, &prof, lambda).unwrap();
            let f = build_factors(&g, &prof, lambda).unwrap();
            prop_assert!(rel(sol.objective, exhaustive(&g, &f)) < 1e-12);
            let el = evaluate_serial(&g, &prof, &sol.plan).unwrap();
            prop_assert!(rel(sol.objective, el.energy + lambda * el.latency) < 1e-9);
        }
    }
}

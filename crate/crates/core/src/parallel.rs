//! Parallel execution: the max-plus latency recursion, the planning energy
//! model with fixed concurrency counts, and the deadline-quantized dynamic
//! program over (node, remaining budget) with per-slot uplink power choice.
//!
//! Table index `k` means "subtree done by t_k". Index 0 stands for every
//! k <= 0 and is always +inf. A duration `x` consumes `grid.slots(x)` steps.

use std::collections::{BTreeSet, HashMap};

use crate::error::{OffloadError, Result};
use crate::graph::{ancestors_closure, decompose, CallGraph, NodeId};
use crate::phy::{
    optimal_power_in_interval, parallel_downlink_rate, parallel_uplink_rate, required_power,
    ConcurrencyProfile, PlatformProfile,
};
use crate::plan::{EnergyLatency, OffloadPlan};
use crate::quant::QuantGrid;
use crate::serial::separate_design_powers;

/// Largest number of free core nodes enumerated by the general solver.
pub const MAX_FREE_CORE: usize = 20;
/// Largest number of (core decision, core uplink duration) combinations.
pub const MAX_CORE_COMBOS: usize = 20_000_000;
/// Largest number of full table recomputations when residual subtrees mix
/// several upstream sources.
pub const MAX_RESIDUAL_RUNS: usize = 4096;

fn uplink_duration(bits: f64, p: f64, prof: &PlatformProfile, conc: &ConcurrencyProfile) -> f64 {
    let rate = parallel_uplink_rate(p, prof, conc);
    if rate > 0.0 {
        bits / rate
    } else {
        f64::INFINITY
    }
}

/// Completion time of every node under the max-plus recursion. Data nodes
/// complete at 0; an uplink at zero power takes forever.
pub fn completion_times(
    g: &CallGraph,
    prof: &PlatformProfile,
    conc: &ConcurrencyProfile,
    plan: &OffloadPlan,
) -> Result<Vec<f64>> {
    plan.check(g)?;
    conc.check()?;
    let dl_rate = parallel_downlink_rate(prof, conc);
    let f_l = prof.f_local / f64::from(conc.n_l);
    let f_r = prof.f_remote / f64::from(conc.n_r);
    let mut done = vec![0.0; g.node_count()];
    for v in g.topo_indices()? {
        if g.is_data(v) {
            continue;
        }
        let remote = plan.is_offloaded(v);
        let mut ready = 0.0f64;
        for &e in g.parent_edges(v) {
            let edge = g.edge(e);
            let m = edge.from.index();
            let transfer = match (plan.is_offloaded(m), remote) {
                (false, true) => {
                    uplink_duration(edge.bits, plan.power(edge.from, edge.to).unwrap_or(0.0), prof, conc)
                }
                (true, false) => edge.bits / dl_rate,
                _ => 0.0,
            };
            ready = ready.max(done[m] + transfer);
        }
        let cycles = g.node(v).cycles;
        done[v] = ready + if remote { cycles / f_r } else { cycles / f_l };
    }
    Ok(done)
}

/// Completion time of the root.
pub fn latency_recursion(
    g: &CallGraph,
    prof: &PlatformProfile,
    conc: &ConcurrencyProfile,
    plan: &OffloadPlan,
) -> Result<f64> {
    Ok(completion_times(g, prof, conc, plan)?[g.root().index()])
}

/// Mobile energy under the planning model: local compute of non-data tasks,
/// uplink transfers at the shared rate, and downlink reception.
pub fn planning_energy(
    g: &CallGraph,
    prof: &PlatformProfile,
    conc: &ConcurrencyProfile,
    plan: &OffloadPlan,
) -> Result<f64> {
    plan.check(g)?;
    conc.check()?;
    let mut energy = 0.0;
    for i in 0..g.node_count() {
        if !plan.is_offloaded(i) && !g.is_data(i) {
            energy += prof.p_local * prof.local_time(g.node(i).cycles);
        }
    }
    for e in plan.uplink_edges(g) {
        let edge = g.edge(e);
        let p = plan.power(edge.from, edge.to).unwrap_or(0.0);
        energy += (p + prof.p_rf) * uplink_duration(edge.bits, p, prof, conc);
    }
    let dl_rate = parallel_downlink_rate(prof, conc);
    for e in plan.downlink_edges(g) {
        energy += (prof.p_rf + prof.p_rx) * (g.edge(e).bits / dl_rate);
    }
    Ok(energy)
}

/// Planning energy together with the recursion latency.
pub fn evaluate_parallel(
    g: &CallGraph,
    prof: &PlatformProfile,
    conc: &ConcurrencyProfile,
    plan: &OffloadPlan,
) -> Result<EnergyLatency> {
    Ok(EnergyLatency {
        energy: planning_energy(g, prof, conc, plan)?,
        latency: latency_recursion(g, prof, conc, plan)?,
    })
}

/// How uplink powers are chosen inside the dynamic program.
#[derive(Debug, Clone, Copy)]
pub enum PowerMode<'a> {
    /// Best power per duration slot.
    Optimize,
    /// Fixed power per edge (indexed like `g.edges()`).
    Frozen(&'a [f64]),
}

/// Best uplink power for each duration slot of one edge. `slots[j]` is the
/// cheapest (power, transmit energy) for which compute-plus-upload of the
/// child consumes exactly `j` steps, or `None` if no allowed power does.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRegions {
    pub slots: Vec<Option<(f64, f64)>>,
    pub first: usize,
}

impl EdgeRegions {
    pub fn compute(
        g: &CallGraph,
        prof: &PlatformProfile,
        conc: &ConcurrencyProfile,
        grid: &QuantGrid,
        edge: usize,
        mode: PowerMode<'_>,
    ) -> Self {
        let k = grid.k_max;
        let mut slots = vec![None; k + 1];
        let e = g.edge(edge);
        let remote_time = g.node(e.to.index()).cycles * f64::from(conc.n_r) / prof.f_remote;
        match mode {
            PowerMode::Frozen(powers) => {
                let p = powers[edge];
                let d = uplink_duration(e.bits, p, prof, conc);
                if d.is_finite() {
                    let j = grid.slots(remote_time + d);
                    if j >= 1 && j <= k {
                        slots[j] = Some((p, (p + prof.p_rf) * d));
                    }
                }
            }
            PowerMode::Optimize => {
                for (j, slot) in slots.iter_mut().enumerate().skip(1) {
                    // Upload duration in ((j-1) eps - L^r, j eps - L^r].
                    let longest = j as f64 * grid.eps - remote_time;
                    if longest <= 0.0 {
                        continue;
                    }
                    let shortest = (j as f64 - 1.0) * grid.eps - remote_time;
                    let lo = required_power(e.bits, longest, prof, conc.n_ul);
                    let hi = if shortest > 0.0 {
                        required_power(e.bits, shortest, prof, conc.n_ul)
                    } else {
                        f64::INFINITY
                    };
                    if !(lo <= prof.p_max) || !(hi >= prof.p_min) {
                        continue;
                    }
                    if let Ok(best) = optimal_power_in_interval(prof, conc, e.bits, lo, hi, prof.p_rf) {
                        *slot = Some(best);
                    }
                }
            }
        }
        let first = slots.iter().position(Option::is_some).unwrap_or(k + 1);
        EdgeRegions { slots, first }
    }

    /// Best (slot, power, total) for a child budget `k` given the parent's
    /// local table; ties go to the smaller slot.
    pub fn best_for_budget(&self, parent_local: &[f64], k: usize) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in self.first..k.min(self.slots.len()) {
            if let Some((p, cost)) = self.slots[j] {
                let total = cost + parent_local[k - j];
                if total < best.map_or(f64::INFINITY, |b| b.2) {
                    best = Some((j, p, total));
                }
            }
        }
        best
    }
}

/// Grid-independent and grid-dependent per-edge constants.
struct EdgeModel {
    s_local: Vec<usize>,
    s_dl: Vec<usize>,
    dl_energy: Vec<f64>,
    s_remote: Vec<usize>,
    regions: Vec<Option<EdgeRegions>>,
}

struct Model<'g> {
    g: &'g CallGraph,
    grid: QuantGrid,
    local_energy: Vec<f64>,
    edges: EdgeModel,
}

impl<'g> Model<'g> {
    fn new(
        g: &'g CallGraph,
        prof: &PlatformProfile,
        conc: &ConcurrencyProfile,
        grid: &QuantGrid,
        mode: PowerMode<'_>,
    ) -> Self {
        let f_l = prof.f_local / f64::from(conc.n_l);
        let f_r = prof.f_remote / f64::from(conc.n_r);
        let dl_rate = parallel_downlink_rate(prof, conc);
        let local_energy = (0..g.node_count())
            .map(|i| if g.is_data(i) { 0.0 } else { prof.p_local * prof.local_time(g.node(i).cycles) })
            .collect();
        let n_edges = g.edges().len();
        let mut edges = EdgeModel {
            s_local: Vec::with_capacity(n_edges),
            s_dl: Vec::with_capacity(n_edges),
            dl_energy: Vec::with_capacity(n_edges),
            s_remote: Vec::with_capacity(n_edges),
            regions: Vec::with_capacity(n_edges),
        };
        for (e, edge) in g.edges().iter().enumerate() {
            let child = edge.to.index();
            let cycles = g.node(child).cycles;
            let dl_time = edge.bits / dl_rate;
            edges.s_local.push(grid.slots(cycles / f_l));
            edges.s_dl.push(grid.slots(cycles / f_l + dl_time));
            edges.dl_energy.push((prof.p_rf + prof.p_rx) * dl_time);
            edges.s_remote.push(grid.slots(cycles / f_r));
            edges.regions.push(if g.is_forced_local(child) {
                None
            } else {
                Some(EdgeRegions::compute(g, prof, conc, grid, e, mode))
            });
        }
        Model { g, grid: *grid, local_energy, edges }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Role {
    /// Not part of this run.
    Skip,
    /// Fixed decision, finished by slot `avail`, no further cost.
    Leaf { remote: bool, avail: usize },
    /// Decision and budget chosen by the program.
    Solve,
}

struct Tables {
    el: Vec<Vec<f64>>,
    er: Vec<Vec<f64>>,
    /// Per edge and budget, when the child is local: parent offloaded?
    pick_l: Vec<Vec<bool>>,
    /// Per edge and budget, when the child is offloaded: upload slot, or 0
    /// when the parent is offloaded too.
    pick_r: Vec<Vec<u32>>,
    pick_power: Vec<Vec<f64>>,
}

fn at(table: &[f64], k: usize, s: usize) -> f64 {
    if s >= k {
        f64::INFINITY
    } else {
        table[k - s]
    }
}

fn run_tables(model: &Model<'_>, roles: &[Role], topo: &[usize]) -> Tables {
    let g = model.g;
    let kmax = model.grid.k_max;
    let n = g.node_count();
    let inf_row = || vec![f64::INFINITY; kmax + 1];
    let mut el = vec![Vec::new(); n];
    let mut er = vec![Vec::new(); n];
    let n_edges = g.edges().len();
    let mut pick_l = vec![Vec::new(); n_edges];
    let mut pick_r = vec![Vec::new(); n_edges];
    let mut pick_power = vec![Vec::new(); n_edges];

    for &v in topo {
        match roles[v] {
            Role::Skip => {}
            Role::Leaf { remote, avail } => {
                let mut step = inf_row();
                for slot in step.iter_mut().skip(avail.max(1)) {
                    *slot = 0.0;
                }
                if remote {
                    el[v] = inf_row();
                    er[v] = step;
                } else {
                    el[v] = step;
                    er[v] = inf_row();
                }
            }
            Role::Solve => {
                let mut local = inf_row();
                let mut remote = inf_row();
                let parents = g.parent_edges(v);
                for &e in parents {
                    pick_l[e] = vec![false; kmax + 1];
                    pick_r[e] = vec![0; kmax + 1];
                    pick_power[e] = vec![0.0; kmax + 1];
                }
                let can_offload = !g.is_forced_local(v);
                for k in 1..=kmax {
                    let mut acc = model.local_energy[v];
                    for &e in parents {
                        let m = g.edge(e).from.index();
                        let stay = at(&el[m], k, model.edges.s_local[e]);
                        let moved = at(&er[m], k, model.edges.s_dl[e]) + model.edges.dl_energy[e];
                        if moved < stay {
                            acc += moved;
                            pick_l[e][k] = true;
                        } else {
                            acc += stay;
                        }
                    }
                    local[k] = acc;
                    if !can_offload {
                        continue;
                    }
                    let mut acc = 0.0;
                    for &e in parents {
                        let m = g.edge(e).from.index();
                        let regions = model.edges.regions[e].as_ref().expect("regions for free child");
                        let up = regions.best_for_budget(&el[m], k);
                        let both = at(&er[m], k, model.edges.s_remote[e]);
                        match up {
                            Some((j, p, total)) if total <= both => {
                                acc += total;
                                pick_r[e][k] = j as u32;
                                pick_power[e][k] = p;
                            }
                            _ => acc += both,
                        }
                    }
                    remote[k] = acc;
                }
                el[v] = local;
                er[v] = remote;
            }
        }
    }
    Tables { el, er, pick_l, pick_r, pick_power }
}

/// Walks the choice tables down from `root` at budget `k`. Returns the
/// decisions of solved nodes and the powers of the uplink edges they chose.
fn backtrack(
    model: &Model<'_>,
    tables: &Tables,
    roles: &[Role],
    topo: &[usize],
    root: usize,
    k: usize,
) -> (Vec<Option<bool>>, Vec<((NodeId, NodeId), f64)>) {
    let g = model.g;
    let mut state: Vec<Option<(bool, usize)>> = vec![None; g.node_count()];
    state[root] = Some((false, k));
    let mut powers = Vec::new();
    for &v in topo.iter().rev() {
        if roles[v] != Role::Solve {
            continue;
        }
        let Some((remote, k)) = state[v] else { continue };
        for &e in g.parent_edges(v) {
            let m = g.edge(e).from.index();
            let (pm, km) = if remote {
                match tables.pick_r[e][k] {
                    0 => (true, k.saturating_sub(model.edges.s_remote[e])),
                    j => {
                        let edge = g.edge(e);
                        powers.push(((edge.from, edge.to), tables.pick_power[e][k]));
                        (false, k - j as usize)
                    }
                }
            } else if tables.pick_l[e][k] {
                (true, k.saturating_sub(model.edges.s_dl[e]))
            } else {
                (false, k.saturating_sub(model.edges.s_local[e]))
            };
            state[m] = Some((pm, km));
        }
    }
    let decisions = (0..g.node_count())
        .map(|v| if roles[v] == Role::Solve { state[v].map(|s| s.0) } else { None })
        .collect();
    (decisions, powers)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelSolution {
    pub plan: OffloadPlan,
    /// Planning-model energy of `plan`, J.
    pub energy: f64,
}

/// Deadline-constrained minimum-energy plan for a call tree.
pub fn solve_parallel_tree(
    g: &CallGraph,
    prof: &PlatformProfile,
    conc: &ConcurrencyProfile,
    grid: &QuantGrid,
) -> Result<ParallelSolution> {
    solve_tree_with(g, prof, conc, grid, PowerMode::Optimize)
}

fn solve_tree_with(
    g: &CallGraph,
    prof: &PlatformProfile,
    conc: &ConcurrencyProfile,
    grid: &QuantGrid,
    mode: PowerMode<'_>,
) -> Result<ParallelSolution> {
    g.ensure_valid()?;
    conc.check()?;
    if !decompose(g).is_tree {
        return Err(OffloadError::NotATree);
    }
    let model = Model::new(g, prof, conc, grid, mode);
    let topo = g.topo_indices()?;
    let roles: Vec<Role> = (0..g.node_count())
        .map(|i| if g.is_data(i) { Role::Leaf { remote: false, avail: 1 } } else { Role::Solve })
        .collect();
    let tables = run_tables(&model, &roles, &topo);
    let root = g.root().index();
    let energy = tables.el[root][grid.k_max];
    if !energy.is_finite() {
        return Err(OffloadError::InfeasibleDeadline { lmax: grid.deadline });
    }
    let (decisions, powers) = backtrack(&model, &tables, &roles, &topo, root, grid.k_max);
    let mut plan = OffloadPlan::from_decisions(decisions.into_iter().map(|d| d.unwrap_or(false)).collect());
    plan.powers.extend(powers);
    Ok(ParallelSolution { plan, energy })
}

/// Deadline-constrained minimum-energy plan for a call graph whose
/// separators split it into trees. The separators and all their ancestors
/// (the core) are enumerated; the rest is a single in-tree solved by the
/// dynamic program with core nodes as fixed, time-shifted leaves.
pub fn solve_parallel_general(
    g: &CallGraph,
    prof: &PlatformProfile,
    conc: &ConcurrencyProfile,
    grid: &QuantGrid,
) -> Result<ParallelSolution> {
    solve_general_with(g, prof, conc, grid, PowerMode::Optimize)
}

/// Upstream origin of a residual subtree: a core node, or time zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Source {
    Origin,
    Core(usize),
}

struct CoreEdgeOption {
    duration: f64,
    power: f64,
    energy: f64,
}

fn solve_general_with(
    g: &CallGraph,
    prof: &PlatformProfile,
    conc: &ConcurrencyProfile,
    grid: &QuantGrid,
    mode: PowerMode<'_>,
) -> Result<ParallelSolution> {
    g.ensure_valid()?;
    conc.check()?;
    let report = decompose(g);
    if !report.forest_after_removal {
        return Err(OffloadError::UnsupportedStructure(
            "residual components are not trees (junction trees are not supported)".into(),
        ));
    }
    if report.is_tree {
        return solve_tree_with(g, prof, conc, grid, mode);
    }
    let n = g.node_count();
    let core_ids = ancestors_closure(g, &report.separators)?;
    let in_core: Vec<bool> = (0..n).map(|i| core_ids.contains(&NodeId::from_index(i))).collect();
    let topo = g.topo_indices()?;
    let core_topo: Vec<usize> = topo.iter().copied().filter(|&v| in_core[v]).collect();
    let free_core: Vec<usize> = core_topo.iter().copied().filter(|&v| !g.is_forced_local(v)).collect();
    if free_core.len() > MAX_FREE_CORE {
        return Err(OffloadError::LimitExceeded { count: free_core.len(), limit: MAX_FREE_CORE });
    }
    let boundary: Vec<usize> = core_topo
        .iter()
        .copied()
        .filter(|&c| g.child_edges(c).iter().any(|&e| !in_core[g.edge(e).to.index()]))
        .collect();

    let model = Model::new(g, prof, conc, grid, mode);
    let root = g.root().index();
    let kmax = grid.k_max;

    // Sources feeding each residual node.
    let mut sources: Vec<BTreeSet<Source>> = vec![BTreeSet::new(); n];
    for &v in &topo {
        if in_core[v] {
            sources[v].insert(Source::Core(v));
        } else if g.is_data(v) {
            sources[v].insert(Source::Origin);
        } else {
            let merged: BTreeSet<Source> = g
                .parent_edges(v)
                .iter()
                .flat_map(|&e| sources[g.edge(e).from.index()].iter().copied().collect::<Vec<_>>())
                .collect();
            sources[v] = merged;
        }
    }
    let shift_invariant = (0..n).all(|v| in_core[v] || v == root || sources[v].len() <= 1);

    let residual_roles = |decisions: &[bool], avail: &dyn Fn(usize) -> usize| -> Vec<Role> {
        (0..n)
            .map(|v| {
                if in_core[v] {
                    if boundary.contains(&v) {
                        Role::Leaf { remote: decisions[v], avail: avail(v) }
                    } else {
                        Role::Skip
                    }
                } else if g.is_data(v) {
                    Role::Leaf { remote: false, avail: 1 }
                } else {
                    Role::Solve
                }
            })
            .collect()
    };

    let f_l = prof.f_local / f64::from(conc.n_l);
    let f_r = prof.f_remote / f64::from(conc.n_r);
    let dl_rate = parallel_downlink_rate(prof, conc);

    let mut relative: HashMap<Vec<bool>, Tables> = HashMap::new();
    let mut absolute: HashMap<(Vec<bool>, Vec<usize>), f64> = HashMap::new();
    let mut combos = 0usize;
    // (energy, decisions, avail per node, core powers)
    let mut best: Option<(f64, Vec<bool>, Vec<usize>, Vec<((NodeId, NodeId), f64)>)> = None;

    for mask in 0u64..(1u64 << free_core.len()) {
        let mut decisions = vec![false; n];
        for (b, &v) in free_core.iter().enumerate() {
            decisions[v] = mask >> b & 1 == 1;
        }
        // Core uplink edges and their duration options.
        let mut up_edges = Vec::new();
        let mut options: Vec<Vec<CoreEdgeOption>> = Vec::new();
        let mut fixed_energy = 0.0;
        for &v in &core_topo {
            if !decisions[v] && !g.is_data(v) {
                fixed_energy += model.local_energy[v];
            }
            for &e in g.parent_edges(v) {
                let edge = g.edge(e);
                let m = edge.from.index();
                if decisions[m] && !decisions[v] {
                    fixed_energy += model.edges.dl_energy[e];
                } else if !decisions[m] && decisions[v] {
                    let opts = core_uplink_options(edge.bits, e, prof, conc, grid, mode);
                    up_edges.push(e);
                    options.push(opts);
                }
            }
        }
        if options.iter().any(Vec::is_empty) {
            continue;
        }
        let count = options.iter().try_fold(1usize, |acc, o| acc.checked_mul(o.len()));
        combos = match count.and_then(|c| combos.checked_add(c)) {
            Some(c) if c <= MAX_CORE_COMBOS => c,
            _ => {
                return Err(OffloadError::UnsupportedStructure(format!(
                    "more than {MAX_CORE_COMBOS} core uplink-duration combinations"
                )))
            }
        };
        let boundary_key: Vec<bool> = boundary.iter().map(|&c| decisions[c]).collect();
        if shift_invariant && !relative.contains_key(&boundary_key) {
            let roles = residual_roles(&decisions, &|_| 1);
            relative.insert(boundary_key.clone(), run_tables(&model, &roles, &topo));
        }

        let mut choice = vec![0usize; options.len()];
        let mut done = vec![0.0f64; n];
        let mut avail = vec![0usize; n];
        loop {
            let mut energy = fixed_energy;
            let mut ul_time: HashMap<usize, f64> = HashMap::new();
            for (i, &e) in up_edges.iter().enumerate() {
                let o = &options[i][choice[i]];
                energy += o.energy;
                ul_time.insert(e, o.duration);
            }
            for &v in &core_topo {
                if g.is_data(v) {
                    done[v] = 0.0;
                    continue;
                }
                let mut ready = 0.0f64;
                for &e in g.parent_edges(v) {
                    let edge = g.edge(e);
                    let m = edge.from.index();
                    let transfer = match (decisions[m], decisions[v]) {
                        (false, true) => ul_time[&e],
                        (true, false) => edge.bits / dl_rate,
                        _ => 0.0,
                    };
                    ready = ready.max(done[m] + transfer);
                }
                let cycles = g.node(v).cycles;
                done[v] = ready + if decisions[v] { cycles / f_r } else { cycles / f_l };
            }
            let mut feasible = true;
            for &c in &boundary {
                avail[c] = grid.slots(done[c]) + 1;
                if avail[c] > kmax {
                    feasible = false;
                }
            }
            if feasible && energy < best.as_ref().map_or(f64::INFINITY, |b| b.0) {
                let residual = if shift_invariant {
                    let tables = &relative[&boundary_key];
                    shifted_root_value(&model, tables, &sources, &avail, root)
                } else {
                    let key: Vec<usize> = boundary.iter().map(|&c| avail[c]).collect();
                    let cache_key = (boundary_key.clone(), key);
                    if let Some(&value) = absolute.get(&cache_key) {
                        value
                    } else {
                        if absolute.len() >= MAX_RESIDUAL_RUNS {
                            return Err(OffloadError::UnsupportedStructure(format!(
                                "more than {MAX_RESIDUAL_RUNS} distinct residual budgets"
                            )));
                        }
                        let roles = residual_roles(&decisions, &|c| avail[c]);
                        let value = run_tables(&model, &roles, &topo).el[root][kmax];
                        absolute.insert(cache_key, value);
                        value
                    }
                };
                let total = energy + residual;
                if total < best.as_ref().map_or(f64::INFINITY, |b| b.0) {
                    let core_powers = up_edges
                        .iter()
                        .enumerate()
                        .map(|(i, &e)| {
                            let edge = g.edge(e);
                            ((edge.from, edge.to), options[i][choice[i]].power)
                        })
                        .collect();
                    best = Some((total, decisions.clone(), avail.clone(), core_powers));
                }
            }
            // Next combination, first edge fastest.
            let mut i = 0;
            while i < choice.len() {
                choice[i] += 1;
                if choice[i] < options[i].len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
            if i == choice.len() {
                break;
            }
        }
    }

    let Some((_, decisions, avail, core_powers)) = best else {
        return Err(OffloadError::InfeasibleDeadline { lmax: grid.deadline });
    };
    let roles = residual_roles(&decisions, &|c| avail[c]);
    let tables = run_tables(&model, &roles, &topo);
    let residual = tables.el[root][kmax];
    let (res_decisions, res_powers) = backtrack(&model, &tables, &roles, &topo, root, kmax);
    let mut offloaded = decisions;
    for (v, d) in res_decisions.into_iter().enumerate() {
        if let Some(d) = d {
            offloaded[v] = d;
        }
    }
    let mut plan = OffloadPlan::from_decisions(offloaded);
    plan.powers.extend(core_powers);
    plan.powers.extend(res_powers);
    plan.prune_powers(g);
    // Core energy is re-derived from the plan so that it matches exactly.
    let core_energy: f64 = {
        let mut e = 0.0;
        for &v in &core_topo {
            if !plan.is_offloaded(v) && !g.is_data(v) {
                e += model.local_energy[v];
            }
            for &pe in g.parent_edges(v) {
                let edge = g.edge(pe);
                match (plan.is_offloaded(edge.from.index()), plan.is_offloaded(v)) {
                    (true, false) => e += model.edges.dl_energy[pe],
                    (false, true) => {
                        let p = plan.power(edge.from, edge.to).unwrap_or(0.0);
                        e += (p + prof.p_rf) * uplink_duration(edge.bits, p, prof, conc);
                    }
                    _ => {}
                }
            }
        }
        e
    };
    Ok(ParallelSolution { plan, energy: core_energy + residual })
}

fn core_uplink_options(
    bits: f64,
    e: usize,
    prof: &PlatformProfile,
    conc: &ConcurrencyProfile,
    grid: &QuantGrid,
    mode: PowerMode<'_>,
) -> Vec<CoreEdgeOption> {
    let option = |p: f64| {
        let duration = uplink_duration(bits, p, prof, conc);
        CoreEdgeOption { duration, power: p, energy: (p + prof.p_rf) * duration }
    };
    match mode {
        PowerMode::Frozen(powers) => {
            let p = powers[e];
            let o = option(p);
            if o.duration.is_finite() && o.duration <= grid.deadline {
                vec![o]
            } else {
                Vec::new()
            }
        }
        PowerMode::Optimize => (1..grid.k_max)
            .filter_map(|j| {
                let p = required_power(bits, j as f64 * grid.eps, prof, conc.n_ul).max(prof.p_min);
                (p <= prof.p_max && p > 0.0).then(|| option(p))
            })
            .collect(),
    }
}

/// Root value with every residual subtree shifted by the availability slot
/// of its single upstream source.
fn shifted_root_value(
    model: &Model<'_>,
    tables: &Tables,
    sources: &[BTreeSet<Source>],
    avail: &[usize],
    root: usize,
) -> f64 {
    let g = model.g;
    let k = model.grid.k_max;
    let mut acc = model.local_energy[root];
    for &e in g.parent_edges(root) {
        let m = g.edge(e).from.index();
        let a = match sources[m].iter().next() {
            Some(Source::Core(c)) => avail[*c],
            _ => 1,
        };
        let shift = a - 1;
        let stay = at(&tables.el[m], k, model.edges.s_local[e] + shift);
        let moved = at(&tables.er[m], k, model.edges.s_dl[e] + shift) + model.edges.dl_energy[e];
        acc += stay.min(moved);
    }
    acc
}

/// Separate-design baseline: powers frozen by the local-time rule, decisions
/// from the dynamic program.
pub fn separate_design_parallel(
    g: &CallGraph,
    prof: &PlatformProfile,
    conc: &ConcurrencyProfile,
    grid: &QuantGrid,
) -> Result<(ParallelSolution, f64)> {
    let (powers, _) = separate_design_powers(g, prof);
    let sol = solve_general_with(g, prof, conc, grid, PowerMode::Frozen(&powers))?;
    let latency = latency_recursion(g, prof, conc, &sol.plan)?;
    Ok((sol, latency))
}

//! Exhaustive reference solvers. They only share the evaluators with the
//! optimizers and are meant for small instances.

use rayon::prelude::*;

use crate::error::{OffloadError, Result};
use crate::graph::CallGraph;
use crate::parallel::{latency_recursion, planning_energy};
use crate::phy::{optimal_serial_power, required_power, ConcurrencyProfile, PlatformProfile};
use crate::plan::OffloadPlan;
use crate::serial::evaluate_serial;

pub const DEFAULT_SERIAL_LIMIT: usize = 20;
pub const DEFAULT_PARALLEL_LIMIT: usize = 10;
pub const MAX_BOUNDARY_EDGES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub plan: OffloadPlan,
    /// E + lambda L for the serial oracle, energy for the parallel one.
    pub objective: f64,
    pub enumerated_count: u64,
}

fn assignment(g: &CallGraph, free: &[usize], mask: u64) -> Vec<bool> {
    let mut offloaded = vec![false; g.node_count()];
    for (bit, &v) in free.iter().enumerate() {
        offloaded[v] = mask >> bit & 1 == 1;
    }
    offloaded
}

fn free_nodes_within(g: &CallGraph, limit: usize) -> Result<Vec<usize>> {
    g.ensure_valid()?;
    let free = g.free_nodes();
    if free.len() > limit {
        return Err(OffloadError::LimitExceeded { count: free.len(), limit });
    }
    Ok(free)
}

/// Minimum of E + lambda L over every assignment, each uplink edge at the
/// common optimal power.
pub fn brute_force_serial(g: &CallGraph, prof: &PlatformProfile, lambda: f64, limit: usize) -> Result<OracleResult> {
    let free = free_nodes_within(g, limit)?;
    let p = optimal_serial_power(prof, lambda)?.power;
    let best = (0..1u64 << free.len())
        .into_par_iter()
        .map(|mask| -> Result<Option<(f64, u64)>> {
            let mut plan = OffloadPlan::from_decisions(assignment(g, &free, mask));
            for e in plan.uplink_edges(g) {
                plan.powers.insert((g.edge(e).from, g.edge(e).to), p);
            }
            match evaluate_serial(g, prof, &plan) {
                Ok(el) => Ok(Some((el.energy + lambda * el.latency, mask))),
                Err(OffloadError::ZeroPowerEdge { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .try_fold(
            || None,
            |acc: Option<(f64, u64)>, item| item.map(|cand| better(acc, cand)),
        )
        .try_reduce(|| None, |a, b| Ok(better(a, b)))?;
    let (objective, mask) = best.expect("the all-local plan is always finite");
    let mut plan = OffloadPlan::from_decisions(assignment(g, &free, mask));
    for e in plan.uplink_edges(g) {
        plan.powers.insert((g.edge(e).from, g.edge(e).to), p);
    }
    Ok(OracleResult { plan, objective, enumerated_count: 1 << free.len() })
}

/// Lower value wins; ties go to the smaller mask.
fn better(a: Option<(f64, u64)>, b: Option<(f64, u64)>) -> Option<(f64, u64)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) {
                Some(y)
            } else {
                Some(x)
            }
        }
    }
}

/// `points` log-spaced powers in (lo, hi]: lo * (hi/lo)^(i/points) for
/// i = 1..=points. Doubling `points` keeps every earlier point.
pub fn power_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (1..=points)
        .map(|i| if i == points { hi } else { lo * (hi / lo).powf(i as f64 / points as f64) })
        .collect()
}

/// Minimum planning energy over every assignment and every combination of
/// grid powers on its uplink edges, subject to recursion latency <= lmax.
/// Each edge's grid starts at the power that would upload it alone in lmax.
pub fn brute_force_parallel(
    g: &CallGraph,
    prof: &PlatformProfile,
    conc: &ConcurrencyProfile,
    lmax: f64,
    grid_points: usize,
    limit: usize,
) -> Result<OracleResult> {
    if grid_points == 0 {
        return Err(OffloadError::InvalidArgument("power grid needs at least one point".into()));
    }
    if !(lmax > 0.0) {
        return Err(OffloadError::InvalidArgument(format!("lmax must be > 0, got {lmax}")));
    }
    conc.check()?;
    let free = free_nodes_within(g, limit)?;
    let mut best: Option<(f64, OffloadPlan)> = None;
    let mut count = 0u64;
    for mask in 0..1u64 << free.len() {
        let base = OffloadPlan::from_decisions(assignment(g, &free, mask));
        let edges = base.uplink_edges(g);
        if edges.len() > MAX_BOUNDARY_EDGES {
            return Err(OffloadError::LimitExceeded { count: edges.len(), limit: MAX_BOUNDARY_EDGES });
        }
        let mut grids = Vec::with_capacity(edges.len());
        for &e in &edges {
            let lo = required_power(g.edge(e).bits, lmax, prof, conc.n_ul).max(prof.p_min);
            if lo > prof.p_max {
                break;
            }
            grids.push(power_grid(lo.max(prof.p_max * 1e-15), prof.p_max, grid_points));
        }
        if grids.len() < edges.len() {
            continue;
        }
        let combos: u64 = grids.iter().map(|g| g.len() as u64).product();
        count += combos;
        let found = (0..combos)
            .into_par_iter()
            .map_init(|| base.clone(), |plan, c| -> Result<Option<(f64, u64)>> {
                let mut rest = c;
                for (&e, grid) in edges.iter().zip(&grids) {
                    let n = grid.len() as u64;
                    plan.powers.insert((g.edge(e).from, g.edge(e).to), grid[(rest % n) as usize]);
                    rest /= n;
                }
                if latency_recursion(g, prof, conc, plan)? > lmax {
                    return Ok(None);
                }
                Ok(Some((planning_energy(g, prof, conc, plan)?, c)))
            })
            .try_fold(|| None, |acc, item| item.map(|cand| better(acc, cand)))
            .try_reduce(|| None, |a, b| Ok(better(a, b)))?;
        if let Some((energy, c)) = found {
            if best.as_ref().map_or(true, |b| energy < b.0) {
                let mut plan = base.clone();
                let mut rest = c;
                for (&e, grid) in edges.iter().zip(&grids) {
                    let n = grid.len() as u64;
                    plan.powers.insert((g.edge(e).from, g.edge(e).to), grid[(rest % n) as usize]);
                    rest /= n;
                }
                best = Some((energy, plan));
            }
        }
    }
    let (objective, plan) = best.ok_or(OffloadError::InfeasibleDeadline { lmax })?;
    Ok(OracleResult { plan, objective, enumerated_count: count })
}

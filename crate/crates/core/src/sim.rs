//! Fixed-step simulation of a plan under parallel execution. Every task moves
//! through idle, compute, upload and download states; concurrent streams and
//! computations share the link and the processors equally, with the counts
//! frozen at the start of each step. Energy and completion time are upper
//! bounds that tighten as the step shrinks.

use std::collections::VecDeque;
use std::fmt;

use serde::Serialize;

use crate::error::{OffloadError, Result};
use crate::graph::{CallGraph, NodeId};
use crate::io::fmt_float;
use crate::phy::PlatformProfile;
use crate::plan::OffloadPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum NodeExecState {
    #[serde(rename = "ID")]
    Idle,
    #[serde(rename = "CM")]
    Complete,
    #[serde(rename = "CP_L")]
    ComputeLocal,
    #[serde(rename = "CP_R")]
    ComputeRemote,
    #[serde(rename = "UL")]
    Upload,
    #[serde(rename = "DL")]
    Download,
}

impl NodeExecState {
    pub fn label(self) -> &'static str {
        match self {
            NodeExecState::Idle => "ID",
            NodeExecState::Complete => "CM",
            NodeExecState::ComputeLocal => "CP_L",
            NodeExecState::ComputeRemote => "CP_R",
            NodeExecState::Upload => "UL",
            NodeExecState::Download => "DL",
        }
    }

    /// States that use a link or a processor.
    pub fn is_active(self) -> bool {
        !matches!(self, NodeExecState::Idle | NodeExecState::Complete)
    }
}

impl fmt::Display for NodeExecState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

use NodeExecState::*;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Counts {
    pub n_ul: usize,
    pub n_dl: usize,
    pub n_l: usize,
    pub n_r: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyBreakdown {
    pub uplink: f64,
    pub downlink: f64,
    pub local: f64,
}

/// Work actually done over the run, for conservation checks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Processed {
    pub local_cycles: f64,
    pub remote_cycles: f64,
    pub ul_bits: f64,
    pub dl_bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    /// Current step index, starting at 1; the state holds on (t_k, t_{k+1}].
    pub k: usize,
    pub eps_d: f64,
    pub x: Vec<NodeExecState>,
    /// Pending uploads of each node as (edge, remaining bits), sent in order.
    pub ul_queue: Vec<VecDeque<(usize, f64)>>,
    /// Remaining downlink bits per edge.
    pub dl_bits: Vec<f64>,
    pub cyc_local: Vec<f64>,
    pub cyc_remote: Vec<f64>,
    /// Counts used during the last completed step.
    pub counts: Counts,
    pub energy: f64,
    pub breakdown: EnergyBreakdown,
    pub processed: Processed,
}

impl SimState {
    pub fn t(&self) -> f64 {
        (self.k as f64 - 1.0) * self.eps_d
    }

    /// Remaining upload bits of a node.
    pub fn ul_bits(&self, index: usize) -> f64 {
        self.ul_queue[index].iter().map(|&(_, b)| b).sum()
    }
}

/// Initial state: data tasks computing locally, everything else idle.
pub fn init_sim(g: &CallGraph, plan: &OffloadPlan, eps_d: f64) -> Result<SimState> {
    if !(eps_d > 0.0 && eps_d.is_finite()) {
        return Err(OffloadError::InvalidArgument(format!("eps_d must be > 0, got {eps_d}")));
    }
    plan.check(g)?;
    let n = g.node_count();
    let mut x = vec![Idle; n];
    let mut ul_queue = vec![VecDeque::new(); n];
    let mut dl_bits = vec![0.0; g.edges().len()];
    let mut cyc_local = vec![0.0; n];
    let mut cyc_remote = vec![0.0; n];
    for i in 0..n {
        let node = g.node(i);
        if plan.is_offloaded(i) {
            cyc_remote[i] = node.cycles;
        } else {
            cyc_local[i] = node.cycles;
        }
        if node.is_data {
            x[i] = ComputeLocal;
        }
    }
    for (e, edge) in g.edges().iter().enumerate() {
        let m = edge.from.index();
        let c = edge.to.index();
        match (plan.is_offloaded(m), plan.is_offloaded(c)) {
            // Data tasks never upload themselves: the offloaded child pulls
            // their bits.
            (false, true) if g.is_data(m) => ul_queue[c].push_back((e, edge.bits)),
            (false, true) => ul_queue[m].push_back((e, edge.bits)),
            (true, false) => dl_bits[e] = edge.bits,
            _ => {}
        }
    }
    Ok(SimState {
        k: 1,
        eps_d,
        x,
        ul_queue,
        dl_bits,
        cyc_local,
        cyc_remote,
        counts: Counts::default(),
        energy: 0.0,
        breakdown: EnergyBreakdown::default(),
        processed: Processed::default(),
    })
}

fn active_dl(g: &CallGraph, s: &SimState, e: usize) -> bool {
    let edge = g.edge(e);
    s.x[edge.to.index()] == Download && s.dl_bits[e] > 0.0 && s.x[edge.from.index()] == Complete
}

/// Advances the state by one step of length eps_d.
pub fn step(s: &mut SimState, g: &CallGraph, prof: &PlatformProfile, plan: &OffloadPlan) {
    let n = g.node_count();
    let eps = s.eps_d;
    let mut counts = Counts::default();
    for v in 0..n {
        match s.x[v] {
            Upload => counts.n_ul += 1,
            ComputeLocal => counts.n_l += 1,
            ComputeRemote => counts.n_r += 1,
            _ => {}
        }
    }
    counts.n_dl = (0..g.edges().len()).filter(|&e| active_dl(g, s, e)).count();
    let old = s.x.clone();
    let mut next = old.clone();

    // Downlink streams first, so that their completion is visible below.
    if counts.n_dl > 0 {
        let chunk = prof.c_dl / counts.n_dl as f64 * eps;
        for e in 0..g.edges().len() {
            if active_dl(g, s, e) {
                let sent = s.dl_bits[e].min(chunk);
                s.dl_bits[e] -= sent;
                s.processed.dl_bits += sent;
                let de = (prof.p_rx + prof.p_rf) * eps;
                s.energy += de;
                s.breakdown.downlink += de;
            }
        }
    }

    for v in 0..n {
        match old[v] {
            Complete => {}
            ComputeLocal => {
                let done = s.cyc_local[v].min(prof.f_local / counts.n_l as f64 * eps);
                s.cyc_local[v] -= done;
                s.processed.local_cycles += done;
                let de = prof.p_local / counts.n_l as f64 * eps;
                s.energy += de;
                s.breakdown.local += de;
                if s.cyc_local[v] <= 0.0 {
                    s.cyc_local[v] = 0.0;
                    next[v] = if !g.is_data(v) && !s.ul_queue[v].is_empty() { Upload } else { Complete };
                }
            }
            ComputeRemote => {
                let done = s.cyc_remote[v].min(prof.f_remote / counts.n_r as f64 * eps);
                s.cyc_remote[v] -= done;
                s.processed.remote_cycles += done;
                if s.cyc_remote[v] <= 0.0 {
                    s.cyc_remote[v] = 0.0;
                    next[v] = Complete;
                }
            }
            Upload => {
                let k = counts.n_ul as f64;
                if let Some(head) = s.ul_queue[v].front_mut() {
                    let edge = g.edge(head.0);
                    let p = plan.power(edge.from, edge.to).unwrap_or(0.0);
                    let sent = head.1.min(prof.uplink_rate(k * p) / k * eps);
                    head.1 -= sent;
                    s.processed.ul_bits += sent;
                    let de = (p + prof.p_rf) * eps;
                    s.energy += de;
                    s.breakdown.uplink += de;
                    if head.1 <= 0.0 {
                        s.ul_queue[v].pop_front();
                    }
                }
                if s.ul_queue[v].is_empty() {
                    next[v] = if plan.is_offloaded(v) { ComputeRemote } else { Complete };
                }
            }
            Download => {
                let parents = g.parent_edges(v);
                let drained = parents.iter().all(|&e| s.dl_bits[e] <= 0.0);
                let ready = parents.iter().all(|&e| old[g.edge(e).from.index()] == Complete);
                if drained && ready {
                    next[v] = ComputeLocal;
                }
            }
            Idle => {
                let parents = g.parent_edges(v);
                let parent_done = |e: &usize| old[g.edge(*e).from.index()] == Complete;
                let parent_remote = |e: &usize| plan.is_offloaded(g.edge(*e).from.index());
                let all_done = parents.iter().all(parent_done);
                if !plan.is_offloaded(v) {
                    if parents.iter().any(|e| parent_remote(e) && parent_done(e)) {
                        next[v] = Download;
                    } else if all_done && !parents.iter().any(parent_remote) {
                        next[v] = ComputeLocal;
                    }
                } else if all_done {
                    next[v] = if s.ul_queue[v].is_empty() { ComputeRemote } else { Upload };
                }
            }
        }
    }
    s.x = next;
    s.counts = counts;
    s.k += 1;
}

/// Run-length encoded state history.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub eps_d: f64,
    pub intervals: Vec<TimelineInterval>,
}

/// `state` held by `node` over steps `start_k..end_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelineInterval {
    pub node: NodeId,
    pub state: NodeExecState,
    pub start_k: usize,
    pub end_k: usize,
}

impl TimelineInterval {
    pub fn start_s(&self, eps_d: f64) -> f64 {
        (self.start_k as f64 - 1.0) * eps_d
    }

    pub fn end_s(&self, eps_d: f64) -> f64 {
        (self.end_k as f64 - 1.0) * eps_d
    }
}

impl Timeline {
    /// Intervals in which the node computes or transfers, ordered by node
    /// then start.
    pub fn active(&self) -> impl Iterator<Item = &TimelineInterval> {
        self.intervals.iter().filter(|i| i.state.is_active())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub energy: f64,
    pub latency: f64,
    pub steps: usize,
    pub eps_d: f64,
    pub breakdown: EnergyBreakdown,
    pub processed: Processed,
    pub timeline: Timeline,
}

/// Default step guard: ten times a finite serial latency estimate, plus
/// slack for the per-dependency idle steps.
pub fn default_step_guard(g: &CallGraph, prof: &PlatformProfile, plan: &OffloadPlan, eps_d: f64) -> usize {
    let mut serial = 0.0;
    for i in 0..g.node_count() {
        let c = g.node(i).cycles;
        serial += if plan.is_offloaded(i) { c / prof.f_remote } else { c / prof.f_local };
    }
    for e in plan.uplink_edges(g) {
        let edge = g.edge(e);
        let rate = prof.uplink_rate(plan.power(edge.from, edge.to).unwrap_or(0.0));
        if rate > 0.0 {
            serial += edge.bits / rate;
        }
    }
    for e in plan.downlink_edges(g) {
        serial += g.edge(e).bits / prof.c_dl;
    }
    let steps = 10.0 * serial / eps_d + 10.0 * g.node_count() as f64 + 100.0;
    if steps > 1e9 {
        1_000_000_000
    } else {
        steps as usize
    }
}

pub fn run(g: &CallGraph, prof: &PlatformProfile, plan: &OffloadPlan, eps_d: f64) -> Result<SimRun> {
    let guard = {
        plan.check(g)?;
        default_step_guard(g, prof, plan, eps_d)
    };
    run_with_guard(g, prof, plan, eps_d, guard)
}

pub fn run_with_guard(
    g: &CallGraph,
    prof: &PlatformProfile,
    plan: &OffloadPlan,
    eps_d: f64,
    max_steps: usize,
) -> Result<SimRun> {
    let mut s = init_sim(g, plan, eps_d)?;
    let root = g.root().index();
    let n = g.node_count();
    let mut open: Vec<(NodeExecState, usize)> = s.x.iter().map(|&x| (x, 1)).collect();
    let mut intervals = Vec::new();
    while s.x[root] != Complete {
        if s.k > max_steps {
            let stuck: Vec<String> = (0..n)
                .filter(|&v| s.x[v] != Complete)
                .map(|v| format!("{}:{}", NodeId::from_index(v), s.x[v]))
                .collect();
            return Err(OffloadError::StalledSchedule { steps: s.k - 1, stuck: stuck.join(",") });
        }
        step(&mut s, g, prof, plan);
        for v in 0..n {
            if s.x[v] != open[v].0 {
                intervals.push(TimelineInterval {
                    node: NodeId::from_index(v),
                    state: open[v].0,
                    start_k: open[v].1,
                    end_k: s.k,
                });
                open[v] = (s.x[v], s.k);
            }
        }
    }
    for (v, &(state, start)) in open.iter().enumerate() {
        if state != Complete {
            intervals.push(TimelineInterval { node: NodeId::from_index(v), state, start_k: start, end_k: s.k });
        }
    }
    intervals.sort_by_key(|i| (i.node, i.start_k));
    Ok(SimRun {
        energy: s.energy,
        latency: s.t(),
        steps: s.k - 1,
        eps_d,
        breakdown: s.breakdown,
        processed: s.processed,
        timeline: Timeline { eps_d, intervals },
    })
}

/// CSV `node,state,start_s,end_s` of the active intervals.
pub fn export_timeline(timeline: &Timeline) -> String {
    let mut out = String::from("node,state,start_s,end_s\n");
    for i in timeline.active() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            i.node,
            i.state,
            fmt_float(i.start_s(timeline.eps_d)),
            fmt_float(i.end_s(timeline.eps_d))
        ));
    }
    out
}

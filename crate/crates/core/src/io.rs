//! File formats: graph, profile and plan JSON, scenario files, sweep CSVs and
//! run summaries. Floats in CSV and summaries are written with 9 significant
//! digits; plan powers keep full precision so a saved plan re-evaluates to
//! the same objective.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{OffloadError, Result};
use crate::graph::{CallGraph, GraphFile, NodeId};
use crate::phy::{PlatformProfile, ProfileFile};
use crate::plan::OffloadPlan;
use crate::serial::LambdaPoint;
use crate::sweep::{Concurrency, DeadlinePoint};

/// Formats like C's `%.9g`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    const P: i32 = 9;
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= P {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn json_float(x: f64) -> String {
    if x.is_finite() {
        fmt_float(x)
    } else {
        "null".into()
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| OffloadError::InvalidArgument(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| OffloadError::InvalidArgument(format!("{}: {e}", path.display())))
}

/// Deserializes with the failing field's path in the error.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        OffloadError::Schema { path, message: e.into_inner().to_string() }
    })
}

pub fn parse_graph(text: &str) -> Result<CallGraph> {
    CallGraph::from_file(from_json::<GraphFile>(text)?)
}

pub fn graph_to_json(g: &CallGraph) -> String {
    serde_json::to_string_pretty(&g.to_file()).expect("graph serializes") + "\n"
}

pub fn load_graph(path: &Path) -> Result<CallGraph> {
    parse_graph(&read(path)?)
}

pub fn save_graph(g: &CallGraph, path: &Path) -> Result<()> {
    write(path, &graph_to_json(g))
}

pub fn parse_profile(text: &str) -> Result<PlatformProfile> {
    PlatformProfile::from_file(&from_json::<ProfileFile>(text)?)
}

pub fn profile_to_json(prof: &PlatformProfile) -> String {
    serde_json::to_string_pretty(&prof.to_file()).expect("profile serializes") + "\n"
}

pub fn load_profile(path: &Path) -> Result<PlatformProfile> {
    parse_profile(&read(path)?)
}

pub fn save_profile(prof: &PlatformProfile, path: &Path) -> Result<()> {
    write(path, &profile_to_json(prof))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    decisions: std::collections::BTreeMap<String, u8>,
    #[serde(default)]
    powers: std::collections::BTreeMap<String, f64>,
}

fn parse_id(s: &str, n: usize) -> Result<NodeId> {
    let id: u32 = s.trim().parse().map_err(|_| OffloadError::InvalidPlan(format!("bad node id {s:?}")))?;
    if id == 0 || id as usize > n {
        return Err(OffloadError::UnknownNode(NodeId(id)));
    }
    Ok(NodeId(id))
}

/// Reads `{decisions: {"id": 0|1}, powers: {"m-n": W}}`. Nodes missing from
/// `decisions` run locally. The result is checked against the graph.
pub fn parse_plan(text: &str, g: &CallGraph) -> Result<OffloadPlan> {
    let file: PlanFile = from_json(text)?;
    let n = g.node_count();
    let mut plan = OffloadPlan::all_local(g);
    for (key, &d) in &file.decisions {
        let id = parse_id(key, n)?;
        plan.offloaded[id.index()] = match d {
            0 => false,
            1 => true,
            _ => {
                return Err(OffloadError::Schema {
                    path: format!("decisions.{key}"),
                    message: format!("decision must be 0 or 1, got {d}"),
                })
            }
        };
    }
    for (key, &p) in &file.powers {
        let (a, b) = key.split_once('-').ok_or_else(|| OffloadError::Schema {
            path: format!("powers.{key}"),
            message: "edge key must look like \"m-n\"".into(),
        })?;
        plan.powers.insert((parse_id(a, n)?, parse_id(b, n)?), p);
    }
    plan.check(g)?;
    Ok(plan)
}

pub fn plan_to_json(plan: &OffloadPlan) -> String {
    let mut out = String::from("{\n  \"decisions\": {");
    for (i, &d) in plan.offloaded.iter().enumerate() {
        let sep = if i == 0 { "" } else { "," };
        write!(out, "{sep}\n    \"{}\": {}", i + 1, u8::from(d)).unwrap();
    }
    out.push_str("\n  },\n  \"powers\": {");
    for (i, (&(a, b), &p)) in plan.powers.iter().enumerate() {
        let sep = if i == 0 { "" } else { "," };
        let value = serde_json::to_string(&p).expect("finite power");
        write!(out, "{sep}\n    \"{a}-{b}\": {value}").unwrap();
    }
    out.push_str(if plan.powers.is_empty() { "}\n}\n" } else { "\n  }\n}\n" });
    out
}

pub fn load_plan(path: &Path, g: &CallGraph) -> Result<OffloadPlan> {
    parse_plan(&read(path)?, g)
}

pub fn save_plan(plan: &OffloadPlan, path: &Path) -> Result<()> {
    write(path, &plan_to_json(plan))
}

/// Plan plus its evaluation, as printed by the solvers and oracles.
pub fn solution_json(plan: &OffloadPlan, fields: &[(&str, f64)]) -> String {
    let mut out = String::from("{\n");
    for (name, v) in fields {
        writeln!(out, "  \"{name}\": {},", json_float(*v)).unwrap();
    }
    let plan = plan_to_json(plan);
    let body = plan.trim_end().trim_start_matches('{').trim_end_matches('}').trim_matches('\n');
    out.push_str(body);
    out.push_str("\n}\n");
    out
}

/// `{energy_J, latency_s, steps, eps_d}`.
pub fn summary_json(energy: f64, latency: f64, steps: usize, eps_d: f64) -> String {
    format!(
        "{{\"energy_J\": {}, \"latency_s\": {}, \"steps\": {steps}, \"eps_d\": {}}}\n",
        json_float(energy),
        json_float(latency),
        json_float(eps_d)
    )
}

pub fn serial_sweep_csv(points: &[LambdaPoint]) -> String {
    let mut out = String::from("lambda,energy_J,latency_s,decisions_bitstring\n");
    for p in points {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_float(p.lambda),
            fmt_float(p.energy),
            fmt_float(p.latency),
            p.plan.bitstring()
        )
        .unwrap();
    }
    out
}

pub fn parallel_sweep_csv(points: &[DeadlinePoint], conc: Concurrency) -> String {
    let mut out = String::from(
        "lmax_s,eps_s,conc,dp_energy_J,recursion_latency_s,sim_energy_J,sim_latency_s,decisions_bitstring\n",
    );
    for p in points {
        match &p.solution {
            Some(s) => writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                fmt_float(p.lmax),
                fmt_float(p.eps),
                s.conc,
                fmt_float(s.dp_energy),
                fmt_float(s.recursion_latency),
                fmt_float(s.sim_energy),
                fmt_float(s.sim_latency),
                s.plan.bitstring()
            ),
            None => writeln!(out, "{},{},{conc},inf,,,,", fmt_float(p.lmax), fmt_float(p.eps)),
        }
        .unwrap();
    }
    out
}

/// Parses `a:b:logN`, `a:b:linN`, or a comma-separated list.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let bad = || OffloadError::InvalidArgument(format!("bad range {spec:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [single] => single.split(',').map(num).collect(),
        [a, b, kind] => {
            let (a, b) = (num(a)?, num(b)?);
            let (log, count) = if let Some(n) = kind.strip_prefix("log") {
                (true, n)
            } else if let Some(n) = kind.strip_prefix("lin") {
                (false, n)
            } else {
                return Err(bad());
            };
            let n: usize = count.parse().map_err(|_| bad())?;
            if n == 0 || (log && !(a > 0.0 && b > 0.0)) || !(a <= b) {
                return Err(bad());
            }
            if n == 1 {
                return Ok(vec![a]);
            }
            Ok((0..n)
                .map(|i| {
                    let f = i as f64 / (n - 1) as f64;
                    if i == 0 {
                        a
                    } else if i == n - 1 {
                        b
                    } else if log {
                        (a.ln() + f * (b.ln() - a.ln())).exp()
                    } else {
                        a + f * (b - a)
                    }
                })
                .collect())
        }
        _ => Err(bad()),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    graph: PathBuf,
    profile: PathBuf,
    mode: String,
    #[serde(default)]
    lambdas: Option<Vec<f64>>,
    #[serde(default)]
    lmax: Option<Vec<f64>>,
    #[serde(default)]
    eps: Option<f64>,
    #[serde(default)]
    eps_d: Option<f64>,
    #[serde(default)]
    conc: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioMode {
    Serial { lambdas: Vec<f64> },
    Parallel { lmaxes: Vec<f64>, eps: f64, eps_d: f64, conc: Concurrency },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub graph: CallGraph,
    pub profile: PlatformProfile,
    pub mode: ScenarioMode,
}

pub const DEFAULT_EPS: f64 = 0.1;
pub const DEFAULT_EPS_D: f64 = 0.01;

/// Loads a scenario; graph and profile paths are relative to the scenario
/// file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let file: ScenarioFile = from_json(&read(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let graph = load_graph(&base.join(&file.graph))?;
    graph.ensure_valid()?;
    let profile = load_profile(&base.join(&file.profile))?;
    let missing = |field: &str| OffloadError::Schema { path: field.into(), message: "missing for this mode".into() };
    let mode = match file.mode.as_str() {
        "serial" => ScenarioMode::Serial { lambdas: file.lambdas.ok_or_else(|| missing("lambdas"))? },
        "parallel" => ScenarioMode::Parallel {
            lmaxes: file.lmax.ok_or_else(|| missing("lmax"))?,
            eps: file.eps.unwrap_or(DEFAULT_EPS),
            eps_d: file.eps_d.unwrap_or(DEFAULT_EPS_D),
            conc: file.conc.as_deref().unwrap_or("1").parse()?,
        },
        other => {
            return Err(OffloadError::Schema {
                path: "mode".into(),
                message: format!("expected \"serial\" or \"parallel\", got {other:?}"),
            })
        }
    };
    Ok(Scenario { graph, profile, mode })
}

/// Sizes the global rayon pool from `OFFLOAD_OPT_THREADS`, if set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("OFFLOAD_OPT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| OffloadError::InvalidArgument(format!("OFFLOAD_OPT_THREADS={v:?} is not a positive integer")))?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

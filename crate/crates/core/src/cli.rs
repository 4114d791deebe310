//! `offload-opt` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{OffloadError, Result};
use crate::graph::{decompose, validate_graph, CallGraph};
use crate::io;
use crate::oracle::{brute_force_parallel, brute_force_serial, DEFAULT_PARALLEL_LIMIT, DEFAULT_SERIAL_LIMIT};
use crate::parallel::{evaluate_parallel, separate_design_parallel};
use crate::phy::{ConcurrencyProfile, PlatformProfile};
use crate::quant::QuantGrid;
use crate::serial::{evaluate_serial, separate_design_serial_weighted, solve_serial_general, sweep_lambda};
use crate::sim;
use crate::sweep::{solve_with_concurrency, sweep_deadline, Concurrency};

#[derive(Debug, Parser)]
#[command(name = "offload-opt", version, about = "Joint offloading and uplink-power optimization for call graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a graph file and print its structure
    Validate { graph: PathBuf },
    /// Optimize one plan
    Solve {
        #[command(subcommand)]
        kind: SolveKind,
    },
    /// Evaluate a saved plan
    Evaluate(EvaluateArgs),
    /// Trade-off curves as CSV
    Sweep {
        #[command(subcommand)]
        kind: SweepKind,
    },
    /// Exhaustive reference solutions
    Oracle {
        #[command(subcommand)]
        kind: OracleKind,
    },
    /// Simulate a plan and write its state timeline as CSV
    Timeline(TimelineArgs),
    /// Separate-design baseline: powers from the local-time rule
    Baseline {
        #[command(subcommand)]
        kind: BaselineKind,
    },
    /// Run a scenario file and print its sweep CSV
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Inputs {
    #[arg(long)]
    graph: PathBuf,
    /// Platform profile; the built-in default profile if omitted
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Output {
    /// Write here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ParallelKnobs {
    #[arg(long)]
    lmax: f64,
    #[arg(long, default_value_t = io::DEFAULT_EPS)]
    eps: f64,
    /// 1..4 or auto
    #[arg(long, default_value = "1")]
    conc: String,
    /// Simulator step
    #[arg(long = "eps-d", default_value_t = io::DEFAULT_EPS_D)]
    eps_d: f64,
}

#[derive(Debug, Subcommand)]
enum SolveKind {
    Serial {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        lambda: f64,
        /// Also save the plan here
        #[arg(long)]
        plan_out: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    Parallel {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        knobs: ParallelKnobs,
        #[arg(long)]
        plan_out: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EvalMode {
    Serial,
    Recursion,
    Simulate,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long, value_enum)]
    mode: EvalMode,
    #[arg(long = "eps-d", default_value_t = io::DEFAULT_EPS_D)]
    eps_d: f64,
    /// Concurrency used by the recursion
    #[arg(long, default_value_t = 1)]
    conc: u32,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Subcommand)]
enum SweepKind {
    Serial {
        #[command(flatten)]
        inputs: Inputs,
        /// a:b:logN, a:b:linN or a comma list
        #[arg(long)]
        lambdas: String,
        #[command(flatten)]
        output: Output,
    },
    Parallel {
        #[command(flatten)]
        inputs: Inputs,
        /// a:b:logN, a:b:linN or a comma list
        #[arg(long)]
        lmax: String,
        #[arg(long, default_value_t = io::DEFAULT_EPS)]
        eps: f64,
        #[arg(long, default_value = "1")]
        conc: String,
        #[arg(long = "eps-d", default_value_t = io::DEFAULT_EPS_D)]
        eps_d: f64,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Subcommand)]
enum OracleKind {
    Serial {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = DEFAULT_SERIAL_LIMIT)]
        limit: usize,
        #[command(flatten)]
        output: Output,
    },
    Parallel {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        lmax: f64,
        #[arg(long, default_value_t = 1)]
        conc: u32,
        /// Power grid points per edge
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long, default_value_t = DEFAULT_PARALLEL_LIMIT)]
        limit: usize,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Args)]
struct TimelineArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "eps-d", default_value_t = io::DEFAULT_EPS_D)]
    eps_d: f64,
}

#[derive(Debug, Subcommand)]
enum BaselineKind {
    Serial {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[command(flatten)]
        output: Output,
    },
    Parallel {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        lmax: f64,
        #[arg(long, default_value_t = io::DEFAULT_EPS)]
        eps: f64,
        #[arg(long, default_value_t = 1)]
        conc: u32,
        #[command(flatten)]
        output: Output,
    },
}

fn load_inputs(inputs: &Inputs) -> Result<(CallGraph, PlatformProfile)> {
    let g = io::load_graph(&inputs.graph)?;
    g.ensure_valid()?;
    let prof = match &inputs.profile {
        Some(p) => io::load_profile(p)?,
        None => crate::fixtures::paper_profile(),
    };
    Ok((g, prof))
}

fn emit(output: &Output, text: &str) -> Result<()> {
    match &output.out {
        Some(path) => write_file(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| OffloadError::InvalidArgument(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { graph } => {
            let g = io::load_graph(&graph)?;
            let report = validate_graph(&g);
            if !report.is_valid() {
                return Err(OffloadError::InvalidGraph(report));
            }
            let d = decompose(&g);
            let seps: Vec<String> = d.separators.iter().map(|s| s.to_string()).collect();
            println!(
                "ok: {} nodes, {} edges, tree={}, separators=[{}]",
                g.node_count(),
                g.edges().len(),
                d.is_tree,
                seps.join(",")
            );
            Ok(())
        }
        Command::Solve { kind: SolveKind::Serial { inputs, lambda, plan_out, output } } => {
            let (g, prof) = load_inputs(&inputs)?;
            let sol = solve_serial_general(&g, &prof, lambda)?;
            let el = evaluate_serial(&g, &prof, &sol.plan)?;
            if let Some(path) = plan_out {
                io::save_plan(&sol.plan, &path)?;
            }
            emit(
                &output,
                &io::solution_json(
                    &sol.plan,
                    &[("lambda", lambda), ("objective", sol.objective), ("energy_J", el.energy), ("latency_s", el.latency)],
                ),
            )
        }
        Command::Solve { kind: SolveKind::Parallel { inputs, knobs, plan_out, output } } => {
            let (g, prof) = load_inputs(&inputs)?;
            let conc: Concurrency = knobs.conc.parse()?;
            let s = solve_with_concurrency(&g, &prof, conc, knobs.lmax, knobs.eps, knobs.eps_d)?;
            if let Some(path) = plan_out {
                io::save_plan(&s.plan, &path)?;
            }
            emit(
                &output,
                &io::solution_json(
                    &s.plan,
                    &[
                        ("lmax_s", knobs.lmax),
                        ("eps_s", knobs.eps),
                        ("conc", f64::from(s.conc)),
                        ("dp_energy_J", s.dp_energy),
                        ("recursion_latency_s", s.recursion_latency),
                        ("sim_energy_J", s.sim_energy),
                        ("sim_latency_s", s.sim_latency),
                    ],
                ),
            )
        }
        Command::Evaluate(args) => {
            let (g, prof) = load_inputs(&args.inputs)?;
            let plan = io::load_plan(&args.plan, &g)?;
            let text = match args.mode {
                EvalMode::Serial => {
                    let el = evaluate_serial(&g, &prof, &plan)?;
                    io::summary_json(el.energy, el.latency, 0, 0.0)
                }
                EvalMode::Recursion => {
                    let el = evaluate_parallel(&g, &prof, &ConcurrencyProfile::uniform(args.conc), &plan)?;
                    io::summary_json(el.energy, el.latency, 0, 0.0)
                }
                EvalMode::Simulate => {
                    let r = sim::run(&g, &prof, &plan, args.eps_d)?;
                    io::summary_json(r.energy, r.latency, r.steps, r.eps_d)
                }
            };
            emit(&args.output, &text)
        }
        Command::Sweep { kind: SweepKind::Serial { inputs, lambdas, output } } => {
            let (g, prof) = load_inputs(&inputs)?;
            let lambdas = io::parse_range(&lambdas)?;
            emit(&output, &io::serial_sweep_csv(&sweep_lambda(&g, &prof, &lambdas)?))
        }
        Command::Sweep { kind: SweepKind::Parallel { inputs, lmax, eps, conc, eps_d, output } } => {
            let (g, prof) = load_inputs(&inputs)?;
            let conc: Concurrency = conc.parse()?;
            let lmaxes = io::parse_range(&lmax)?;
            let pts = sweep_deadline(&g, &prof, conc, &lmaxes, eps, eps_d)?;
            emit(&output, &io::parallel_sweep_csv(&pts, conc))
        }
        Command::Oracle { kind: OracleKind::Serial { inputs, lambda, limit, output } } => {
            let (g, prof) = load_inputs(&inputs)?;
            let r = brute_force_serial(&g, &prof, lambda, limit)?;
            let el = evaluate_serial(&g, &prof, &r.plan)?;
            emit(
                &output,
                &io::solution_json(
                    &r.plan,
                    &[
                        ("lambda", lambda),
                        ("objective", r.objective),
                        ("energy_J", el.energy),
                        ("latency_s", el.latency),
                        ("enumerated", r.enumerated_count as f64),
                    ],
                ),
            )
        }
        Command::Oracle { kind: OracleKind::Parallel { inputs, lmax, conc, grid, limit, output } } => {
            let (g, prof) = load_inputs(&inputs)?;
            let cp = ConcurrencyProfile::uniform(conc);
            let r = brute_force_parallel(&g, &prof, &cp, lmax, grid, limit)?;
            let el = evaluate_parallel(&g, &prof, &cp, &r.plan)?;
            emit(
                &output,
                &io::solution_json(
                    &r.plan,
                    &[
                        ("lmax_s", lmax),
                        ("energy_J", r.objective),
                        ("recursion_latency_s", el.latency),
                        ("enumerated", r.enumerated_count as f64),
                    ],
                ),
            )
        }
        Command::Timeline(args) => {
            let (g, prof) = load_inputs(&args.inputs)?;
            let plan = io::load_plan(&args.plan, &g)?;
            let r = sim::run(&g, &prof, &plan, args.eps_d)?;
            write_file(&args.out, &sim::export_timeline(&r.timeline))?;
            print!("{}", io::summary_json(r.energy, r.latency, r.steps, r.eps_d));
            Ok(())
        }
        Command::Baseline { kind: BaselineKind::Serial { inputs, lambda, output } } => {
            let (g, prof) = load_inputs(&inputs)?;
            let d = separate_design_serial_weighted(&g, &prof, lambda)?;
            for (a, b) in &d.capped_edges {
                eprintln!("warning: power on edge {a}-{b} capped at p_max");
            }
            emit(&output, &io::solution_json(&d.plan, &[("energy_J", d.energy), ("latency_s", d.latency)]))
        }
        Command::Baseline { kind: BaselineKind::Parallel { inputs, lmax, eps, conc, output } } => {
            let (g, prof) = load_inputs(&inputs)?;
            let grid = QuantGrid::new(lmax, eps)?;
            let (sol, latency) = separate_design_parallel(&g, &prof, &ConcurrencyProfile::uniform(conc), &grid)?;
            emit(
                &output,
                &io::solution_json(&sol.plan, &[("dp_energy_J", sol.energy), ("recursion_latency_s", latency)]),
            )
        }
        Command::Run { scenario, out } => {
            let s = io::load_scenario(&scenario)?;
            let csv = match s.mode {
                io::ScenarioMode::Serial { lambdas } => {
                    io::serial_sweep_csv(&sweep_lambda(&s.graph, &s.profile, &lambdas)?)
                }
                io::ScenarioMode::Parallel { lmaxes, eps, eps_d, conc } => {
                    io::parallel_sweep_csv(&sweep_deadline(&s.graph, &s.profile, conc, &lmaxes, eps, eps_d)?, conc)
                }
            };
            emit(&Output { out }, &csv)
        }
    }
}

/// Parses `argv`, runs the command and returns the process exit code:
/// 0 success, 1 invalid input, 2 infeasible, 3 unsupported structure.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = io::configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

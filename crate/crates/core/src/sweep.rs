//! Deadline sweeps of the parallel optimizer, each point checked by the
//! latency recursion and the simulator.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{OffloadError, Result};
use crate::graph::CallGraph;
use crate::parallel::{latency_recursion, solve_parallel_general};
use crate::phy::{ConcurrencyProfile, PlatformProfile};
use crate::plan::OffloadPlan;
use crate::quant::QuantGrid;
use crate::sim;

/// Concurrency knob: one value for all four counts, or a search over 1..=4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Concurrency {
    Fixed(u32),
    Auto,
}

pub const AUTO_RANGE: std::ops::RangeInclusive<u32> = 1..=4;

impl FromStr for Concurrency {
    type Err = OffloadError;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Concurrency::Auto);
        }
        match s.parse::<u32>() {
            Ok(n) if AUTO_RANGE.contains(&n) => Ok(Concurrency::Fixed(n)),
            _ => Err(OffloadError::InvalidArgument(format!("concurrency must be 1..4 or auto, got {s:?}"))),
        }
    }
}

impl fmt::Display for Concurrency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Concurrency::Fixed(n) => write!(f, "{n}"),
            Concurrency::Auto => f.write_str("auto"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeadlineSolution {
    pub conc: u32,
    pub plan: OffloadPlan,
    pub dp_energy: f64,
    pub recursion_latency: f64,
    pub sim_energy: f64,
    pub sim_latency: f64,
}

/// One solve at a given deadline, then the recursion and simulator checks.
pub fn solve_checked(
    g: &CallGraph,
    prof: &PlatformProfile,
    n: u32,
    lmax: f64,
    eps: f64,
    eps_d: f64,
) -> Result<DeadlineSolution> {
    let conc = ConcurrencyProfile::uniform(n);
    let grid = QuantGrid::new(lmax, eps)?;
    let sol = solve_parallel_general(g, prof, &conc, &grid)?;
    let recursion_latency = latency_recursion(g, prof, &conc, &sol.plan)?;
    let run = sim::run(g, prof, &sol.plan, eps_d)?;
    Ok(DeadlineSolution {
        conc: n,
        plan: sol.plan,
        dp_energy: sol.energy,
        recursion_latency,
        sim_energy: run.energy,
        sim_latency: run.latency,
    })
}

/// Solves with a fixed concurrency, or tries 1..=4 and keeps the candidate
/// the simulator rates best: meeting the deadline first, then lowest energy.
pub fn solve_with_concurrency(
    g: &CallGraph,
    prof: &PlatformProfile,
    conc: Concurrency,
    lmax: f64,
    eps: f64,
    eps_d: f64,
) -> Result<DeadlineSolution> {
    match conc {
        Concurrency::Fixed(n) => solve_checked(g, prof, n, lmax, eps, eps_d),
        Concurrency::Auto => {
            let mut best: Option<DeadlineSolution> = None;
            let mut last_err = None;
            for n in AUTO_RANGE {
                match solve_checked(g, prof, n, lmax, eps, eps_d) {
                    Ok(s) => {
                        let key = |s: &DeadlineSolution| (s.sim_latency > lmax, s.sim_energy);
                        if best.as_ref().map_or(true, |b| key(&s) < key(b)) {
                            best = Some(s);
                        }
                    }
                    Err(e @ OffloadError::InfeasibleDeadline { .. }) => last_err = Some(e),
                    Err(e) => return Err(e),
                }
            }
            best.ok_or_else(|| last_err.unwrap_or(OffloadError::InfeasibleDeadline { lmax }))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeadlinePoint {
    pub lmax: f64,
    pub eps: f64,
    /// `None` when no plan meets the deadline.
    pub solution: Option<DeadlineSolution>,
}

/// One point per deadline, in input order. Infeasible deadlines are kept as
/// empty points; any other error aborts the sweep.
pub fn sweep_deadline(
    g: &CallGraph,
    prof: &PlatformProfile,
    conc: Concurrency,
    lmaxes: &[f64],
    eps: f64,
    eps_d: f64,
) -> Result<Vec<DeadlinePoint>> {
    g.ensure_valid()?;
    lmaxes
        .par_iter()
        .map(|&lmax| match solve_with_concurrency(g, prof, conc, lmax, eps, eps_d) {
            Ok(s) => Ok(DeadlinePoint { lmax, eps, solution: Some(s) }),
            Err(OffloadError::InfeasibleDeadline { .. }) => Ok(DeadlinePoint { lmax, eps, solution: None }),
            Err(e) => Err(e),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{fig8, paper_profile};

    #[test]
    fn parses_concurrency() {
        assert_eq!("auto".parse::<Concurrency>().unwrap(), Concurrency::Auto);
        assert_eq!("3".parse::<Concurrency>().unwrap(), Concurrency::Fixed(3));
        assert!("0".parse::<Concurrency>().is_err());
        assert!("5".parse::<Concurrency>().is_err());
    }

    #[test]
    fn fig8_sweep_rows() {
        let g = fig8();
        let prof = paper_profile();
        let lmaxes = [1.0, 4.0, 8.0, 14.0];
        let pts = sweep_deadline(&g, &prof, Concurrency::Fixed(1), &lmaxes, 0.1, 0.01).unwrap();
        assert!(pts[0].solution.is_none());
        let mut prev = f64::INFINITY;
        for p in &pts[1..] {
            let s = p.solution.as_ref().unwrap();
            assert!(s.recursion_latency <= p.lmax + 1e-9);
            assert!(s.dp_energy <= prev * (1.0 + 1e-9));
            prev = s.dp_energy;
        }
    }

    #[test]
    fn auto_never_worse_than_fixed_in_sim_energy_when_all_meet_deadline() {
        let g = fig8();
        let prof = paper_profile();
        let auto = solve_with_concurrency(&g, &prof, Concurrency::Auto, 10.0, 0.1, 0.01).unwrap();
        for n in AUTO_RANGE {
            let fixed = solve_checked(&g, &prof, n, 10.0, 0.1, 0.01).unwrap();
            if fixed.sim_latency <= 10.0 && auto.sim_latency <= 10.0 {
                assert!(auto.sim_energy <= fixed.sim_energy);
            }
        }
    }
}

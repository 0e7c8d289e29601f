//! Quantum bounds and randomness-versus-violation curves.

use serde::Serialize;

use super::moment::{
    build_bound_problem, build_on_structure, Level, MomentStructure, ViolationMode,
};
use super::sdp::{SolverAdapter, SolverOutcome, SolverStatus};
use crate::bellcat::BellFunctional;
use crate::error::{invalid, Error, Result};
use crate::par::Execution;
use crate::qcore::{outcome_labels, ProbabilityCell};
use crate::randomness::min_entropy;

/// Relaxation maximum of a functional.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumBound {
    /// Certified upper bound (dual side).
    pub upper: f64,
    /// Value attained by the returned moment matrix (primal side).
    pub achievable: f64,
    pub status: SolverStatus,
}

impl QuantumBound {
    pub fn value(&self) -> f64 {
        self.upper
    }
}

pub fn quantum_bound(
    f: &BellFunctional,
    level: Level,
    solver: &dyn SolverAdapter,
) -> Result<QuantumBound> {
    let problem = build_bound_problem(f, level)?;
    let out = solver.submit(&problem.to_sdp());
    if !out.status.is_accepted() {
        return Err(Error::Solver(format!(
            "quantum bound of {} failed: {}",
            f.name(),
            out.status
        )));
    }
    Ok(QuantumBound {
        upper: out.dual_objective,
        achievable: out.primal_objective,
        status: out.status,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PairPolicy {
    /// One zero-based input pair.
    Fixed(usize, usize),
    /// The input pair with the smallest guessing probability.
    #[default]
    BestPair,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CurveOptions {
    pub level: Level,
    pub mode: ViolationMode,
    pub execution: Execution,
}

/// One grid point of a sweep. Field names are the CSV header.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub p: f64,
    pub violation: f64,
    pub guessing_probability: f64,
    pub min_entropy_bits: f64,
    pub solver_status: SolverStatus,
}

/// Relative distance kept from the relaxation maximum when solving. At the
/// maximum itself the moment side has no interior and the multiplier of the
/// violation constraint diverges, so no finite certificate exists.
pub const FACE_MARGIN: f64 = 2e-7;

/// The violation value actually imposed for a requested `V`.
pub fn solvable_violation(violation: f64, bound: f64) -> f64 {
    violation.min(bound - FACE_MARGIN * bound.abs().max(1.0))
}

pub const CSV_HEADER: &str = "p,violation,guessing_probability,min_entropy_bits,solver_status";

/// Worst-case guessing probability for one input pair: the largest
/// per-outcome relaxation optimum.
#[derive(Clone, Debug, PartialEq)]
pub struct PairGuess {
    pub i: usize,
    pub j: usize,
    pub guessing_probability: f64,
    pub status: SolverStatus,
}

fn pair_cells(f: &BellFunctional, i: usize, j: usize) -> Vec<ProbabilityCell> {
    let s = f.scenario();
    let mut cells = Vec::new();
    for &a in &outcome_labels(s.alice_outcomes()[i]) {
        for &b in &outcome_labels(s.bob_outcomes()[j]) {
            cells.push(ProbabilityCell::new(a, b, i, j));
        }
    }
    cells
}

fn worse(a: SolverStatus, b: SolverStatus) -> SolverStatus {
    a.max(b)
}

/// Maximum of `p(target)` at violation `V`, one relaxation solve.
pub fn max_probability(
    f: &BellFunctional,
    violation: f64,
    target: ProbabilityCell,
    options: &CurveOptions,
    solver: &dyn SolverAdapter,
) -> Result<SolverOutcome> {
    let structure = MomentStructure::new(f.scenario(), options.level)?;
    let problem = build_on_structure(structure, f, violation, target, options.mode)?;
    Ok(solver.submit(&problem.to_sdp()))
}

/// Evaluates the guessing probability of every `(p, pair)` combination.
///
/// Every `(p, pair, outcome)` triple is an independent solve; they run under
/// `options.execution` and are merged in grid order.
pub fn randomness_curve(
    f: &BellFunctional,
    p_grid: &[f64],
    policy: PairPolicy,
    options: &CurveOptions,
    solver: &dyn SolverAdapter,
) -> Result<Vec<CurveRow>> {
    if let Some(p) = p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return invalid(format!("grid value {p} outside [0, 1]"));
    }
    let s = f.scenario();
    let pairs: Vec<(usize, usize)> = match policy {
        PairPolicy::Fixed(i, j) => {
            if i >= s.alice_inputs() || j >= s.bob_inputs() {
                return invalid(format!(
                    "input pair ({}, {}) outside the scenario",
                    i + 1,
                    j + 1
                ));
            }
            vec![(i, j)]
        }
        PairPolicy::BestPair => (0..s.alice_inputs())
            .flat_map(|i| (0..s.bob_inputs()).map(move |j| (i, j)))
            .collect(),
    };
    let structure = MomentStructure::new(s, options.level)?;
    let bound = quantum_bound(f, options.level, solver)?;
    // The attained side keeps p = 1 feasible.
    let qmax = bound.achievable;

    let mut jobs = Vec::new();
    for (k, &p) in p_grid.iter().enumerate() {
        for (pi, &(i, j)) in pairs.iter().enumerate() {
            for cell in pair_cells(f, i, j) {
                jobs.push((k, pi, solvable_violation(p * qmax, qmax), cell));
            }
        }
    }
    let results: Vec<Result<(f64, SolverStatus)>> =
        options.execution.map(&jobs, |&(_, _, v, cell)| {
            let problem = build_on_structure(structure.clone(), f, v, cell, options.mode)?;
            let out = solver.submit(&problem.to_sdp());
            Ok((out.dual_objective, out.status))
        });

    let mut per_pair =
        vec![vec![(f64::NEG_INFINITY, SolverStatus::Optimal); pairs.len()]; p_grid.len()];
    for (&(k, pi, _, _), res) in jobs.iter().zip(results) {
        let (value, status) = res?;
        let slot = &mut per_pair[k][pi];
        slot.1 = worse(slot.1, status);
        // A failed solve cannot bound Eve; count it as a certain guess.
        slot.0 = slot.0.max(if status.is_accepted() { value } else { 1.0 });
    }

    p_grid
        .iter()
        .zip(per_pair)
        .map(|(&p, guesses)| {
            let (g, status) = guesses.into_iter().fold(
                (f64::INFINITY, SolverStatus::Optimal),
                |(g, st), (pg, ps)| (g.min(pg), worse(st, ps)),
            );
            let g = g.clamp(f64::MIN_POSITIVE, 1.0);
            Ok(CurveRow {
                p,
                violation: p * qmax,
                guessing_probability: g,
                min_entropy_bits: min_entropy(g)?,
                solver_status: status,
            })
        })
        .collect()
}

/// Per-pair guessing probabilities at one violation value.
pub fn pair_guesses(
    f: &BellFunctional,
    violation: f64,
    options: &CurveOptions,
    solver: &dyn SolverAdapter,
) -> Result<Vec<PairGuess>> {
    let s = f.scenario();
    let structure = MomentStructure::new(s, options.level)?;
    let pairs: Vec<(usize, usize)> = (0..s.alice_inputs())
        .flat_map(|i| (0..s.bob_inputs()).map(move |j| (i, j)))
        .collect();
    options
        .execution
        .map(&pairs, |&(i, j)| {
            let mut g = f64::NEG_INFINITY;
            let mut status = SolverStatus::Optimal;
            for cell in pair_cells(f, i, j) {
                let problem =
                    build_on_structure(structure.clone(), f, violation, cell, options.mode)?;
                let out = solver.submit(&problem.to_sdp());
                status = worse(status, out.status);
                g = g.max(if out.status.is_accepted() {
                    out.dual_objective
                } else {
                    1.0
                });
            }
            Ok(PairGuess {
                i,
                j,
                guessing_probability: g,
                status,
            })
        })
        .into_iter()
        .collect()
}

/// `count` evenly spaced points from `start` to `stop` inclusive.
pub fn linear_grid(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return invalid("a sweep grid needs at least two points");
    }
    // Interpolate, then drop float noise so that 0.76 prints as 0.76.
    let snap = |x: f64| (x * 1e12).round() / 1e12;
    Ok((0..count)
        .map(|k| {
            let t = k as f64 / (count - 1) as f64;
            snap(start * (1.0 - t) + stop * t)
        })
        .collect())
}

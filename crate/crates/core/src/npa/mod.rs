//! Second-level moment relaxation of the quantum set, the guessing-probability
//! maximisation under a violation constraint, and the solver plumbing.

pub mod curve;
pub mod moment;
pub mod monomial;
pub mod sdp;
pub mod sdpa;

pub use curve::{
    linear_grid, max_probability, pair_guesses, quantum_bound, randomness_curve,
    solvable_violation, CurveOptions, CurveRow, PairGuess, PairPolicy, QuantumBound, CSV_HEADER,
};
pub use moment::{
    build_bound_problem, build_moment_problem, generate_monomials, AffineConstraint,
    ConstraintKind, Level, LinearForm, MomentProblem, MomentStructure, ViolationMode,
};
pub use monomial::{reduce, Monomial, Symbol};
pub use sdp::{
    solver_by_name, InteriorPointSolver, LinearRow, SdpProblem, SolverAdapter, SolverOutcome,
    SolverStatus,
};
pub use sdpa::write_sdpa;

//! Semidefinite programs in linear-matrix-inequality form and an in-process
//! primal-dual interior-point solver for them.
//!
//! An [`SdpProblem`] reads
//!
//! ```text
//! maximise    objective·y + objective_constant
//! subject to  F0 + Σ_k y_k F_k ⪰ 0            (one PSD block of size psd_dim)
//!             row·y = rhs                     (equalities)
//!             row·y ≥ rhs                     (inequalities)
//! ```
//!
//! The solver eliminates equalities by pivoting, moves inequalities into a
//! diagonal block, and runs an infeasible-start HKM path-following method
//! with a Mehrotra corrector. The coefficient matrices stay sparse, so the
//! Schur complement costs `O((Σ nnz)²)` rather than `O(m² n²)`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Sparse affine row `Σ coeffs·y` compared against `rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn eval(&self, y: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(k, c)| c * y[k]).sum()
    }
}

/// Upper-triangular sparse entries `(row, col, value)` with `row ≤ col`.
pub type SparseSymmetric = Vec<(usize, usize, f64)>;

#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    pub psd_dim: usize,
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub constant: SparseSymmetric,
    pub coefficients: Vec<SparseSymmetric>,
    pub equalities: Vec<LinearRow>,
    pub inequalities: Vec<LinearRow>,
}

impl SdpProblem {
    /// `F0 + Σ y_k F_k`.
    pub fn lmi_matrix(&self, y: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.psd_dim, self.psd_dim);
        let mut put = |entries: &SparseSymmetric, scale: f64| {
            for &(r, c, v) in entries {
                m[(r, c)] += scale * v;
                if r != c {
                    m[(c, r)] += scale * v;
                }
            }
        };
        put(&self.constant, 1.0);
        for (k, f) in self.coefficients.iter().enumerate() {
            put(f, y[k]);
        }
        m
    }

    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective_constant
            + self
                .objective
                .iter()
                .zip(y)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    Unbounded,
    Failure,
}

impl SolverStatus {
    /// Statuses whose objective values may be reported.
    pub fn is_accepted(self) -> bool {
        matches!(self, SolverStatus::Optimal | SolverStatus::NearOptimal)
    }
}

impl fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::NearOptimal => "near_optimal",
            SolverStatus::Infeasible => "infeasible",
            SolverStatus::Unbounded => "unbounded",
            SolverStatus::Failure => "failure",
        })
    }
}

/// Result of one solve. `primal_objective` is attained by the returned
/// moment assignment; `dual_objective` bounds the maximum from above.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverOutcome {
    pub status: SolverStatus,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub residual: f64,
    pub iterations: usize,
    pub solution: Vec<f64>,
}

impl SolverOutcome {
    fn without_solution(status: SolverStatus, num_vars: usize) -> Self {
        Self {
            status,
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            residual: f64::INFINITY,
            iterations: 0,
            solution: vec![f64::NAN; num_vars],
        }
    }

    pub fn gap(&self) -> f64 {
        (self.dual_objective - self.primal_objective).abs()
    }
}

/// Anything that can solve an [`SdpProblem`]. Each call owns its problem.
pub trait SolverAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn submit(&self, problem: &SdpProblem) -> SolverOutcome;
}

/// Looks up an in-process solver by name.
pub fn solver_by_name(name: &str) -> Result<Box<dyn SolverAdapter>> {
    match name {
        "ipm" | "interior-point" => Ok(Box::new(InteriorPointSolver::default())),
        other => Err(Error::Validation(format!(
            "unknown solver adapter `{other}` (available: ipm)"
        ))),
    }
}

#[derive(Clone, Debug)]
pub struct InteriorPointSolver {
    pub max_iterations: usize,
    /// Relative tolerance on infeasibilities and gap that stops iterating.
    pub tolerance: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Absolute residual and gap accepted as `optimal`.
    pub accept_residual: f64,
    pub accept_gap: f64,
}

impl Default for InteriorPointSolver {
    fn default() -> Self {
        Self {
            max_iterations: 120,
            tolerance: 1e-10,
            step_fraction: 0.95,
            accept_residual: 1e-7,
            accept_gap: 1e-6,
        }
    }
}

impl SolverAdapter for InteriorPointSolver {
    fn name(&self) -> &str {
        "ipm"
    }

    fn submit(&self, problem: &SdpProblem) -> SolverOutcome {
        match Reduced::new(problem) {
            Ok(reduced) => self.solve_reduced(&reduced),
            Err(status) => SolverOutcome::without_solution(status, problem.num_vars),
        }
    }
}

/// Affine expression `constant + Σ terms[free]·z_free` of one original variable.
#[derive(Clone, Debug)]
struct Expr {
    constant: f64,
    terms: BTreeMap<usize, f64>,
}

/// The LMI after equality elimination: `Z = C − Σ z_l A_l ⪰ 0`, maximise `b·z`.
struct Reduced {
    n: usize,
    c: DMatrix<f64>,
    /// Full symmetric listing of each `A_l`.
    a: Vec<Vec<(usize, usize, f64)>>,
    b: DVector<f64>,
    objective_constant: f64,
    exprs: Vec<Expr>,
    free: Vec<usize>,
}

const PIVOT_DROP: f64 = 1e-13;
const CONSISTENCY_TOL: f64 = 1e-9;

impl Reduced {
    fn new(p: &SdpProblem) -> std::result::Result<Self, SolverStatus> {
        let mut exprs: Vec<Expr> = (0..p.num_vars)
            .map(|k| Expr {
                constant: 0.0,
                terms: BTreeMap::from([(k, 1.0)]),
            })
            .collect();
        let mut is_free = vec![true; p.num_vars];

        let substitute = |exprs: &[Expr], row: &LinearRow| -> (f64, BTreeMap<usize, f64>) {
            let mut constant = 0.0;
            let mut terms: BTreeMap<usize, f64> = BTreeMap::new();
            for &(k, a) in &row.coeffs {
                constant += a * exprs[k].constant;
                for (&q, &t) in &exprs[k].terms {
                    *terms.entry(q).or_insert(0.0) += a * t;
                }
            }
            let scale = terms.values().fold(0.0_f64, |m, v| m.max(v.abs()));
            terms.retain(|_, v| v.abs() > PIVOT_DROP * scale.max(1.0));
            (constant, terms)
        };

        for row in &p.equalities {
            let (constant, terms) = substitute(&exprs, row);
            let Some((&pivot, &pc)) = terms.iter().max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            else {
                if (row.rhs - constant).abs() > CONSISTENCY_TOL * (1.0 + row.rhs.abs()) {
                    return Err(SolverStatus::Infeasible);
                }
                continue;
            };
            // z_pivot = (rhs − constant − Σ_{q≠pivot} t_q z_q) / pc
            let shift = (row.rhs - constant) / pc;
            for e in exprs.iter_mut() {
                if let Some(t) = e.terms.remove(&pivot) {
                    e.constant += t * shift;
                    for (&q, &tq) in &terms {
                        if q != pivot {
                            *e.terms.entry(q).or_insert(0.0) -= t * tq / pc;
                        }
                    }
                }
            }
            is_free[pivot] = false;
        }

        let free: Vec<usize> = (0..p.num_vars).filter(|&k| is_free[k]).collect();
        let reduced_id: HashMap<usize, usize> =
            free.iter().enumerate().map(|(l, &k)| (k, l)).collect();
        let m = free.len();

        let mut ineq_rows = Vec::new();
        for row in &p.inequalities {
            let (constant, terms) = substitute(&exprs, row);
            if terms.is_empty() {
                if constant - row.rhs < -CONSISTENCY_TOL * (1.0 + row.rhs.abs()) {
                    return Err(SolverStatus::Infeasible);
                }
                continue;
            }
            ineq_rows.push((constant - row.rhs, terms));
        }
        let n = p.psd_dim + ineq_rows.len();

        let mut g0: HashMap<(usize, usize), f64> = HashMap::new();
        let mut g: Vec<HashMap<(usize, usize), f64>> = vec![HashMap::new(); m];
        for &(r, c, v) in &p.constant {
            *g0.entry((r, c)).or_insert(0.0) += v;
        }
        for (k, f) in p.coefficients.iter().enumerate() {
            for &(r, c, v) in f {
                if exprs[k].constant != 0.0 {
                    *g0.entry((r, c)).or_insert(0.0) += exprs[k].constant * v;
                }
                for (q, &t) in &exprs[k].terms {
                    *g[reduced_id[q]].entry((r, c)).or_insert(0.0) += t * v;
                }
            }
        }
        for (d, (constant, terms)) in ineq_rows.iter().enumerate() {
            let idx = p.psd_dim + d;
            *g0.entry((idx, idx)).or_insert(0.0) += constant;
            for (q, &t) in terms {
                *g[reduced_id[q]].entry((idx, idx)).or_insert(0.0) += t;
            }
        }

        let mut c = DMatrix::zeros(n, n);
        for (&(r, col), &v) in &g0 {
            c[(r, col)] += v;
            if r != col {
                c[(col, r)] += v;
            }
        }
        let a = g
            .into_iter()
            .map(|entries| {
                let mut list: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * entries.len());
                let mut sorted: Vec<_> = entries.into_iter().filter(|(_, v)| *v != 0.0).collect();
                sorted.sort_by_key(|&(k, _)| k);
                for ((r, col), v) in sorted {
                    list.push((r, col, -v));
                    if r != col {
                        list.push((col, r, -v));
                    }
                }
                list
            })
            .collect();

        let mut objective_constant = p.objective_constant;
        let mut b = DVector::zeros(m);
        for (k, &ck) in p.objective.iter().enumerate() {
            if ck == 0.0 {
                continue;
            }
            objective_constant += ck * exprs[k].constant;
            for (q, &t) in &exprs[k].terms {
                b[reduced_id[q]] += ck * t;
            }
        }

        Ok(Self {
            n,
            c,
            a,
            b,
            objective_constant,
            exprs,
            free,
        })
    }

    /// `⟨A_l, W⟩` for every `l`.
    fn apply(&self, w: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.a.len(),
            self.a
                .iter()
                .map(|al| al.iter().map(|&(r, c, v)| v * w[(r, c)]).sum::<f64>()),
        )
    }

    /// `Σ y_l A_l`.
    fn adjoint(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for (al, &yl) in self.a.iter().zip(y.iter()) {
            if yl != 0.0 {
                for &(r, c, v) in al {
                    out[(r, c)] += yl * v;
                }
            }
        }
        out
    }

    /// Schur complement `M_kl = tr(A_k X A_l Z⁻¹)`.
    fn schur(&self, x: &DMatrix<f64>, zinv: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.a.len();
        let n = self.n;
        let xs = x.as_slice();
        let zs = zinv.as_slice();
        let mut out = DMatrix::zeros(m, m);
        for k in 0..m {
            for l in k..m {
                let mut s = 0.0;
                for &(p, q, va) in &self.a[k] {
                    for &(r, t, vc) in &self.a[l] {
                        s += va * vc * xs[q + r * n] * zs[t + p * n];
                    }
                }
                out[(k, l)] = s;
                out[(l, k)] = s;
            }
        }
        out
    }

    fn recover(&self, z: &DVector<f64>) -> Vec<f64> {
        let pos: HashMap<usize, usize> =
            self.free.iter().enumerate().map(|(l, &k)| (k, l)).collect();
        self.exprs
            .iter()
            .map(|e| e.constant + e.terms.iter().map(|(q, t)| t * z[pos[q]]).sum::<f64>())
            .collect()
    }
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Largest `α` keeping `X + α dX` positive semidefinite.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let chol = x.clone().cholesky()?;
    let n = x.nrows();
    let linv = chol.l().solve_lower_triangular(&DMatrix::identity(n, n))?;
    let w = symmetrize(&linv * dx * linv.transpose());
    let min = w
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Some(if min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min
    })
}

fn solve_spd(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Some(ch.solve(rhs));
    }
    let scale = m.diagonal().amax().max(1.0);
    let mut reg = m.clone();
    for k in 0..reg.nrows() {
        reg[(k, k)] += 1e-12 * scale;
    }
    if let Some(ch) = reg.cholesky() {
        return Some(ch.solve(rhs));
    }
    m.clone().lu().solve(rhs)
}

struct Iterate {
    x: DMatrix<f64>,
    z: DMatrix<f64>,
    y: DVector<f64>,
}

impl InteriorPointSolver {
    fn solve_reduced(&self, red: &Reduced) -> SolverOutcome {
        let n = red.n;
        let m = red.a.len();
        if m == 0 {
            let min = red
                .c
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            let status = if min >= -1e-9 {
                SolverStatus::Optimal
            } else {
                SolverStatus::Infeasible
            };
            return SolverOutcome {
                status,
                primal_objective: red.objective_constant,
                dual_objective: red.objective_constant,
                residual: (-min).max(0.0),
                iterations: 0,
                solution: red.recover(&DVector::zeros(0)),
            };
        }

        let a_norms: Vec<f64> = red
            .a
            .iter()
            .map(|al| al.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt())
            .collect();
        let c_norm = red.c.norm();
        let b_norm = red.b.norm();
        let sqrt_n = (n as f64).sqrt();
        let xi = a_norms
            .iter()
            .zip(red.b.iter())
            .map(|(an, bl)| (1.0 + bl.abs()) / (1.0 + an))
            .fold(sqrt_n.max(10.0), f64::max);
        let eta = a_norms
            .iter()
            .copied()
            .fold(sqrt_n.max(10.0).max(c_norm), f64::max);
        let mut it = Iterate {
            x: DMatrix::identity(n, n) * xi,
            z: DMatrix::identity(n, n) * eta,
            y: DVector::zeros(m),
        };

        let mut iterations = 0;
        let mut stalls = 0;
        let mut best: Option<(SolverOutcome, f64)> = None;
        loop {
            let rd = &red.c - &it.z - red.adjoint(&it.y);
            let rp = &red.b - red.apply(&it.x);
            let pobj = inner(&red.c, &it.x);
            let dobj = red.b.dot(&it.y);
            let mu = inner(&it.x, &it.z) / n as f64;
            let pinf = rp.norm() / (1.0 + b_norm);
            let dinf = rd.norm() / (1.0 + c_norm);
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());

            let outcome = self.assess(red, &it, &rp, &rd, iterations);
            let score = outcome.residual.max(outcome.gap());
            if best
                .as_ref()
                .is_none_or(|(b, s)| (outcome.status, score) < (b.status, *s))
            {
                best = Some((outcome, score));
            }
            if (pinf < self.tolerance && dinf < self.tolerance && gap < self.tolerance)
                || iterations >= self.max_iterations
                || stalls >= 5
                || it.x.amax() > 1e12
                || it.y.amax() > 1e12
            {
                break;
            }
            iterations += 1;

            let Some(zinv) = it.z.clone().cholesky().map(|c| c.inverse()) else {
                break;
            };
            let schur = red.schur(&it.x, &zinv);
            let base = &red.b + red.apply(&(&it.x * &rd * &zinv));

            // Predictor: affine-scaling direction.
            let Some(dy) = solve_spd(&schur, &base) else {
                break;
            };
            let dz = &rd - red.adjoint(&dy);
            let dx = symmetrize(-&it.x - &it.x * &dz * &zinv);
            let (Some(sp), Some(sd)) = (max_step(&it.x, &dx), max_step(&it.z, &dz)) else {
                break;
            };
            let ap = (self.step_fraction * sp).min(1.0);
            let ad = (self.step_fraction * sd).min(1.0);
            let mu_aff = inner(&(&it.x + &dx * ap), &(&it.z + &dz * ad)) / n as f64;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // Corrector with the second-order term of the predictor.
            let corr = &dx * &dz * &zinv;
            let rhs = &base - red.apply(&zinv) * (sigma * mu) + red.apply(&corr);
            let Some(dy) = solve_spd(&schur, &rhs) else {
                break;
            };
            let dz = &rd - red.adjoint(&dy);
            let dx = symmetrize(&zinv * (sigma * mu) - &it.x - &it.x * &dz * &zinv - corr);
            let (Some(sp), Some(sd)) = (max_step(&it.x, &dx), max_step(&it.z, &dz)) else {
                break;
            };
            let ap = (self.step_fraction * sp).min(1.0);
            let ad = (self.step_fraction * sd).min(1.0);
            if ap < 1e-8 && ad < 1e-8 {
                stalls += 1;
            }
            it.x += &dx * ap;
            it.z = symmetrize(&it.z + &dz * ad);
            it.y += &dy * ad;
            it.x = symmetrize(std::mem::take(&mut it.x));
        }

        let rd = &red.c - &it.z - red.adjoint(&it.y);
        let rp = &red.b - red.apply(&it.x);
        let last = self.assess(red, &it, &rp, &rd, iterations);
        // Late iterations can lose accuracy; keep the best point seen, but
        // report divergence from the final one.
        match best {
            Some((mut b, _)) if b.status.is_accepted() => {
                b.iterations = iterations;
                b
            }
            _ => last,
        }
    }

    fn assess(
        &self,
        red: &Reduced,
        it: &Iterate,
        rp: &DVector<f64>,
        rd: &DMatrix<f64>,
        iterations: usize,
    ) -> SolverOutcome {
        let pobj = inner(&red.c, &it.x) + red.objective_constant;
        let dobj = red.b.dot(&it.y) + red.objective_constant;
        let residual = rp.amax().max(rd.amax());
        let gap = (pobj - dobj).abs();
        let status = if residual <= self.accept_residual && gap <= self.accept_gap {
            SolverStatus::Optimal
        } else if residual <= 1e-5 && gap <= 1e-4 {
            SolverStatus::NearOptimal
        } else if pobj < -1e7 || it.x.amax() > 1e10 {
            // The bounding side diverges: no moment assignment satisfies the constraints.
            SolverStatus::Infeasible
        } else if dobj > 1e7 {
            SolverStatus::Unbounded
        } else {
            SolverStatus::Failure
        };
        SolverOutcome {
            status,
            primal_objective: dobj,
            dual_objective: pobj,
            residual,
            iterations,
            solution: red.recover(&it.y),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_problem() -> SdpProblem {
        // maximise y0 subject to [[1, y0], [y0, 1]] ⪰ 0  →  y0 = 1.
        SdpProblem {
            psd_dim: 2,
            num_vars: 1,
            objective: vec![1.0],
            objective_constant: 0.0,
            constant: vec![(0, 0, 1.0), (1, 1, 1.0)],
            coefficients: vec![vec![(0, 1, 1.0)]],
            equalities: vec![],
            inequalities: vec![],
        }
    }

    #[test]
    fn two_by_two_correlation() {
        let out = InteriorPointSolver::default().submit(&diag_problem());
        assert_eq!(out.status, SolverStatus::Optimal);
        assert!((out.primal_objective - 1.0).abs() < 1e-7);
        assert!((out.dual_objective - 1.0).abs() < 1e-7);
        assert!(out.dual_objective >= out.primal_objective - 1e-9);
    }

    #[test]
    fn equality_is_eliminated() {
        // maximise y0 + y1 with y0 = 0.3 and [[1, y1], [y1, 1]] ⪰ 0.
        let mut p = diag_problem();
        p.num_vars = 2;
        p.objective = vec![1.0, 1.0];
        p.coefficients = vec![vec![], vec![(0, 1, 1.0)]];
        p.equalities = vec![LinearRow {
            coeffs: vec![(0, 1.0)],
            rhs: 0.3,
        }];
        let out = InteriorPointSolver::default().submit(&p);
        assert!(out.status.is_accepted());
        assert!((out.primal_objective - 1.3).abs() < 1e-6);
        assert!((out.solution[0] - 0.3).abs() < 1e-9);
    }

    #[test]
    fn inequality_becomes_diagonal_block() {
        // maximise y0 with y0 ≤ 0.5 (−y0 ≥ −0.5) inside the 2×2 LMI.
        let mut p = diag_problem();
        p.inequalities = vec![LinearRow {
            coeffs: vec![(0, -1.0)],
            rhs: -0.5,
        }];
        let out = InteriorPointSolver::default().submit(&p);
        assert!(out.status.is_accepted());
        assert!((out.dual_objective - 0.5).abs() < 1e-6);
    }

    #[test]
    fn inconsistent_equalities_are_infeasible() {
        let mut p = diag_problem();
        p.equalities = vec![
            LinearRow {
                coeffs: vec![(0, 1.0)],
                rhs: 0.3,
            },
            LinearRow {
                coeffs: vec![(0, 2.0)],
                rhs: 0.2,
            },
        ];
        assert_eq!(
            InteriorPointSolver::default().submit(&p).status,
            SolverStatus::Infeasible
        );
    }

    #[test]
    fn infeasible_lmi_detected() {
        // y0 = 2 cannot satisfy [[1, y0], [y0, 1]] ⪰ 0.
        let mut p = diag_problem();
        p.equalities = vec![LinearRow {
            coeffs: vec![(0, 1.0)],
            rhs: 2.0,
        }];
        let out = InteriorPointSolver::default().submit(&p);
        assert!(!out.status.is_accepted(), "{out:?}");
    }

    #[test]
    fn solver_lookup() {
        assert_eq!(solver_by_name("ipm").unwrap().name(), "ipm");
        assert!(solver_by_name("mosek").is_err());
    }
}

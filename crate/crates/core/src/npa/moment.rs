//! Moment-matrix structure of the relaxation and the guessing-probability
//! problem built on it.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::monomial::{reduce, Monomial, Symbol};
use super::sdp::{LinearRow, SdpProblem};
use crate::bellcat::BellFunctional;
use crate::error::{invalid, Error, Result};
use crate::qcore::{HermitianOperator, Party, ProbabilityCell, Realization, Scenario};

/// Outcome index of the projector kept for every two-outcome input (label `+1`).
const RETAINED_OUTCOME: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Level {
    /// Identity and single projectors.
    One,
    /// Adds all products of two distinct projectors, one ordering per
    /// same-party pair.
    #[default]
    Two,
}

/// Generates the indexed monomial list, identity first.
pub fn generate_monomials(scenario: &Scenario, level: Level) -> Result<Vec<Monomial>> {
    for party in [Party::Alice, Party::Bob] {
        if let Some(i) = scenario.outcomes(party).iter().position(|&n| n != 2) {
            return Err(Error::Capacity(format!(
                "moment relaxation supports two-outcome inputs only; {party}{} has {} outcomes",
                i + 1,
                scenario.outcomes(party)[i]
            )));
        }
    }
    let alice: Vec<Symbol> = (0..scenario.alice_inputs())
        .map(|i| Symbol::alice(i, RETAINED_OUTCOME))
        .collect();
    let bob: Vec<Symbol> = (0..scenario.bob_inputs())
        .map(|j| Symbol::bob(j, RETAINED_OUTCOME))
        .collect();

    let mut out = vec![Monomial::identity()];
    out.extend(alice.iter().chain(&bob).map(|&s| Monomial::Word(vec![s])));
    if level == Level::Two {
        for side in [&alice, &bob] {
            for (k, &s) in side.iter().enumerate() {
                for &t in &side[k + 1..] {
                    out.push(Monomial::Word(vec![s, t]));
                }
            }
        }
        for &a in &alice {
            for &b in &bob {
                out.push(Monomial::Word(vec![a, b]));
            }
        }
    }
    Ok(out)
}

/// `constant + Σ coeffs[v]·y_v` over moment variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearForm {
    pub constant: f64,
    pub terms: BTreeMap<usize, f64>,
}

impl LinearForm {
    pub fn add_term(&mut self, var: usize, c: f64) {
        *self.terms.entry(var).or_insert(0.0) += c;
    }

    pub fn add_scaled(&mut self, other: &LinearForm, scale: f64) {
        self.constant += scale * other.constant;
        for (&v, &c) in &other.terms {
            self.add_term(v, scale * c);
        }
    }

    pub fn eval(&self, moments: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|(&v, &c)| c * moments[v])
                .sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ViolationMode {
    /// `Σ c·p = V`.
    #[default]
    Equal,
    /// `Σ c·p ≥ V`.
    AtLeast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    Equal,
    AtLeast,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffineConstraint {
    pub label: String,
    pub form: LinearForm,
    pub kind: ConstraintKind,
    pub rhs: f64,
}

/// Monomials, the symmetric cell → moment-variable map, and the lookup from
/// canonical words to variables. Variable 0 is the identity moment.
#[derive(Clone, Debug)]
pub struct MomentStructure {
    scenario: Scenario,
    monomials: Vec<Monomial>,
    moments: Vec<Monomial>,
    matrix_map: Vec<Vec<Option<usize>>>,
    index: HashMap<Monomial, usize>,
}

impl MomentStructure {
    pub fn new(scenario: &Scenario, level: Level) -> Result<Self> {
        let monomials = generate_monomials(scenario, level)?;
        let n = monomials.len();
        let mut moments = Vec::new();
        let mut index = HashMap::new();
        let mut matrix_map = vec![vec![None; n]; n];
        for r in 0..n {
            for c in r..n {
                let m = monomials[r].sandwich(&monomials[c]);
                if m.is_zero() {
                    continue;
                }
                let key = m.moment_key();
                let id = *index.entry(key.clone()).or_insert_with(|| {
                    moments.push(key);
                    moments.len() - 1
                });
                matrix_map[r][c] = Some(id);
                matrix_map[c][r] = Some(id);
            }
        }
        debug_assert_eq!(matrix_map[0][0], Some(0));
        Ok(Self {
            scenario: scenario.clone(),
            monomials,
            moments,
            matrix_map,
            index,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    /// Distinct moment variables, identity first.
    pub fn moments(&self) -> &[Monomial] {
        &self.moments
    }

    pub fn matrix_map(&self) -> &[Vec<Option<usize>>] {
        &self.matrix_map
    }

    pub fn psd_dim(&self) -> usize {
        self.monomials.len()
    }

    /// Moment variable of a word, if the word appears in the matrix.
    pub fn variable(&self, word: &[Symbol]) -> Option<usize> {
        let m = reduce(word);
        if m.is_zero() {
            return None;
        }
        self.index.get(&m.moment_key()).copied()
    }

    /// `p(a, b | i, j)` as a linear form, writing the `−1` projector as `I − P`.
    pub fn probability_form(&self, cell: &ProbabilityCell) -> Result<LinearForm> {
        self.scenario.locate(cell)?;
        let factor = |party: Party, input: usize, label: i32| -> Vec<(f64, Option<Symbol>)> {
            let p = Symbol {
                party,
                input,
                outcome: RETAINED_OUTCOME,
            };
            if label == 1 {
                vec![(1.0, Some(p))]
            } else {
                vec![(1.0, None), (-1.0, Some(p))]
            }
        };
        let mut form = LinearForm::default();
        for (ca, sa) in factor(Party::Alice, cell.i, cell.a) {
            for (cb, sb) in factor(Party::Bob, cell.j, cell.b) {
                let word: Vec<Symbol> = sa.into_iter().chain(sb).collect();
                let var = self.variable(&word).ok_or_else(|| {
                    Error::Validation(format!("{cell} needs a moment missing from the relaxation"))
                })?;
                form.add_term(var, ca * cb);
            }
        }
        Ok(form)
    }

    pub fn functional_form(&self, f: &BellFunctional) -> Result<LinearForm> {
        if f.scenario() != &self.scenario {
            return invalid(format!(
                "functional {} does not match the moment scenario",
                f.name()
            ));
        }
        let mut form = LinearForm::default();
        for (cell, &c) in f.coefficients() {
            form.add_scaled(&self.probability_form(cell)?, c);
        }
        Ok(form)
    }

    fn normalization(&self) -> AffineConstraint {
        let mut form = LinearForm::default();
        form.add_term(0, 1.0);
        AffineConstraint {
            label: "normalization".into(),
            form,
            kind: ConstraintKind::Equal,
            rhs: 1.0,
        }
    }

    /// Real moment matrix `Re tr(ρ u† v)` of an explicit realization with
    /// projective two-outcome measurements.
    pub fn realization_moments(&self, r: &Realization) -> Result<DMatrix<f64>> {
        Ok(self.hermitian_realization_moments(r)?.map(|z| z.re))
    }

    /// Complex moment matrix `tr(ρ u† v)` of an explicit realization.
    pub fn hermitian_realization_moments(&self, r: &Realization) -> Result<DMatrix<Complex64>> {
        if r.scenario() != self.scenario {
            return invalid("realization scenario does not match the moment structure");
        }
        let id2 = HermitianOperator::identity(2);
        let operator = |m: &Monomial| -> Result<DMatrix<Complex64>> {
            let mut acc = DMatrix::<Complex64>::identity(4, 4);
            for s in m.symbols() {
                let effect = &r.measurement(s.party, s.input)?.effects()[s.outcome];
                let lifted = match s.party {
                    Party::Alice => effect.entries().kronecker(id2.entries()),
                    Party::Bob => id2.entries().kronecker(effect.entries()),
                };
                acc *= lifted;
            }
            Ok(acc)
        };
        let ops = self
            .monomials
            .iter()
            .map(operator)
            .collect::<Result<Vec<_>>>()?;
        let rho = r.state.op().entries();
        let n = self.psd_dim();
        Ok(DMatrix::from_fn(n, n, |u, v| {
            (rho * ops[u].adjoint() * &ops[v]).trace()
        }))
    }

    /// Largest spread among cells that share a moment variable.
    pub fn identification_residual(&self, gamma: &DMatrix<f64>) -> f64 {
        let mut first: Vec<Option<f64>> = vec![None; self.moments.len()];
        let mut worst = 0.0_f64;
        for (r, row) in self.matrix_map.iter().enumerate() {
            for (c, id) in row.iter().enumerate() {
                match id {
                    Some(id) => match first[*id] {
                        Some(v) => worst = worst.max((gamma[(r, c)] - v).abs()),
                        None => first[*id] = Some(gamma[(r, c)]),
                    },
                    None => worst = worst.max(gamma[(r, c)].abs()),
                }
            }
        }
        worst
    }

    /// Moment matrix assembled from variable values.
    pub fn assemble(&self, moments: &[f64]) -> DMatrix<f64> {
        let n = self.psd_dim();
        DMatrix::from_fn(n, n, |r, c| {
            self.matrix_map[r][c].map_or(0.0, |id| moments[id])
        })
    }
}

/// A linear objective over the moment matrix subject to affine constraints.
#[derive(Clone, Debug)]
pub struct MomentProblem {
    pub structure: MomentStructure,
    pub objective: LinearForm,
    pub constraints: Vec<AffineConstraint>,
    pub warnings: Vec<String>,
}

impl MomentProblem {
    pub fn psd_dim(&self) -> usize {
        self.structure.psd_dim()
    }

    /// LMI form: the identity moment is fixed to one by substitution, every
    /// other moment becomes a free variable.
    pub fn to_sdp(&self) -> SdpProblem {
        let s = &self.structure;
        let num_vars = s.moments.len() - 1;
        let mut constant = Vec::new();
        let mut coefficients = vec![Vec::new(); num_vars];
        for r in 0..s.psd_dim() {
            for c in r..s.psd_dim() {
                match s.matrix_map[r][c] {
                    Some(0) => constant.push((r, c, 1.0)),
                    Some(id) => coefficients[id - 1].push((r, c, 1.0)),
                    None => {}
                }
            }
        }
        let split = |form: &LinearForm| -> (Vec<(usize, f64)>, f64) {
            let mut shift = form.constant;
            let mut row = Vec::new();
            for (&v, &c) in &form.terms {
                if v == 0 {
                    shift += c;
                } else if c != 0.0 {
                    row.push((v - 1, c));
                }
            }
            (row, shift)
        };
        let (obj_row, objective_constant) = split(&self.objective);
        let mut objective = vec![0.0; num_vars];
        for (v, c) in obj_row {
            objective[v] = c;
        }
        let mut equalities = Vec::new();
        let mut inequalities = Vec::new();
        for con in &self.constraints {
            let (row, shift) = split(&con.form);
            if row.is_empty() && con.label == "normalization" {
                continue;
            }
            let line = LinearRow {
                coeffs: row,
                rhs: con.rhs - shift,
            };
            match con.kind {
                ConstraintKind::Equal => equalities.push(line),
                ConstraintKind::AtLeast => inequalities.push(line),
            }
        }
        SdpProblem {
            psd_dim: s.psd_dim(),
            num_vars,
            objective,
            objective_constant,
            constant,
            coefficients,
            equalities,
            inequalities,
        }
    }
}

/// Maximise `p(target)` over the relaxation subject to `f = V` (or `f ≥ V`).
pub fn build_moment_problem(
    f: &BellFunctional,
    violation: f64,
    target: ProbabilityCell,
    mode: ViolationMode,
    level: Level,
) -> Result<MomentProblem> {
    let structure = MomentStructure::new(f.scenario(), level)?;
    build_on_structure(structure, f, violation, target, mode)
}

pub(crate) fn build_on_structure(
    structure: MomentStructure,
    f: &BellFunctional,
    violation: f64,
    target: ProbabilityCell,
    mode: ViolationMode,
) -> Result<MomentProblem> {
    let objective = structure.probability_form(&target)?;
    let form = structure.functional_form(f)?;
    let mut warnings = Vec::new();
    if let Some(q) = f.quantum_bound() {
        if violation.abs() > q + 1e-9 {
            warnings.push(format!(
                "violation {violation} lies outside [-{q}, {q}]; the problem is likely infeasible"
            ));
        }
    }
    let violation_constraint = AffineConstraint {
        label: "violation".into(),
        form,
        kind: match mode {
            ViolationMode::Equal => ConstraintKind::Equal,
            ViolationMode::AtLeast => ConstraintKind::AtLeast,
        },
        rhs: violation,
    };
    let constraints = vec![structure.normalization(), violation_constraint];
    Ok(MomentProblem {
        structure,
        objective,
        constraints,
        warnings,
    })
}

/// Maximise `f` itself over the relaxation.
pub fn build_bound_problem(f: &BellFunctional, level: Level) -> Result<MomentProblem> {
    let structure = MomentStructure::new(f.scenario(), level)?;
    let objective = structure.functional_form(f)?;
    let constraints = vec![structure.normalization()];
    Ok(MomentProblem {
        structure,
        objective,
        constraints,
        warnings: Vec::new(),
    })
}

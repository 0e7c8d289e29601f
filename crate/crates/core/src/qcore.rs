//! Dense complex linear algebra for qubit and two-qubit objects, and the
//! behaviors (joint outcome tables) they produce.
//!
//! Input indices are zero-based throughout the Rust API. Outcomes are always
//! addressed by label: two-outcome inputs use `+1`/`-1`, inputs with `n != 2`
//! outcomes use `1..=n`.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, parse_json, Error, Result};

/// Tolerance for algebraic identities (Hermiticity, completeness, traces).
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Tolerance for eigenvalue positivity.
pub const EIGEN_TOL: f64 = 1e-10;
/// Tolerance for per-input-pair normalization of a behavior.
pub const NORMALIZATION_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// A 2×2 or 4×4 complex Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    entries: DMatrix<Complex64>,
}

impl HermitianOperator {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        let dim = entries.nrows();
        if entries.ncols() != dim || !(dim == 2 || dim == 4) {
            return invalid(format!(
                "operator must be 2x2 or 4x4, got {}x{}",
                entries.nrows(),
                entries.ncols()
            ));
        }
        let asym = max_abs(&(&entries - entries.adjoint()));
        if asym > ALGEBRA_TOL {
            return invalid(format!("operator is not Hermitian (deviation {asym:e})"));
        }
        Ok(Self { entries })
    }

    /// Builds an operator from row-major real entries.
    pub fn from_real(dim: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return invalid(format!(
                "expected {} entries, got {}",
                dim * dim,
                rows.len()
            ));
        }
        let m = DMatrix::from_row_iterator(dim, dim, rows.iter().map(|&x| Complex64::new(x, 0.0)));
        Self::new(m)
    }

    /// Skips validation; callers guarantee Hermiticity.
    fn from_trusted(entries: DMatrix<Complex64>) -> Self {
        Self { entries }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_trusted(DMatrix::identity(dim, dim))
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_trusted(DMatrix::zeros(dim, dim))
    }

    pub fn pauli_x() -> Self {
        Self::from_trusted(DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]))
    }

    pub fn pauli_y() -> Self {
        let i = Complex64::new(0.0, 1.0);
        Self::from_trusted(DMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]))
    }

    pub fn pauli_z() -> Self {
        Self::from_trusted(DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]))
    }

    /// `c.identity·I + c.z·σ_z + c.y·σ_y + c.x·σ_x`.
    pub fn from_pauli(c: PauliCoefficients) -> Self {
        Self::identity(2) * c.identity
            + Self::pauli_z() * c.z
            + Self::pauli_y() * c.y
            + Self::pauli_x() * c.x
    }

    /// `n̂·σ` for a real Bloch direction `[x, y, z]`.
    pub fn bloch(direction: [f64; 3]) -> Self {
        Self::from_pauli(PauliCoefficients {
            identity: 0.0,
            x: direction[0],
            y: direction[1],
            z: direction[2],
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs(&(&self.entries - &other.entries))
    }

    /// Transpose (entry-wise conjugate for a Hermitian matrix).
    pub fn transpose(&self) -> Self {
        Self::from_trusted(self.entries.transpose())
    }

    /// Eigenvalues in ascending order. 2×2 uses the closed form, 4×4 the
    /// Hermitian eigensolver.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim() == 2 {
            let a = self.entries[(0, 0)].re;
            let d = self.entries[(1, 1)].re;
            let b = self.entries[(0, 1)].norm();
            let mean = 0.5 * (a + d);
            let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            return vec![mean - radius, mean + radius];
        }
        let mut ev: Vec<f64> = self
            .entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn matmul(&self, other: &Self) -> DMatrix<Complex64> {
        &self.entries * &other.entries
    }

    fn same_dim(&self, other: &Self) {
        assert_eq!(self.dim(), other.dim(), "operator dimension mismatch");
    }
}

impl Add for HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> Self {
        &self + &rhs
    }
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        self.same_dim(rhs);
        HermitianOperator::from_trusted(&self.entries + &rhs.entries)
    }
}

impl Sub for HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> Self {
        &self - &rhs
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> HermitianOperator {
        self.same_dim(rhs);
        HermitianOperator::from_trusted(&self.entries - &rhs.entries)
    }
}

impl Mul<f64> for HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, rhs: f64) -> Self {
        &self * rhs
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, rhs: f64) -> HermitianOperator {
        HermitianOperator::from_trusted(self.entries.map(|z| z * rhs))
    }
}

/// Real coefficients of a qubit operator in the basis `(I, σ_z, σ_y, σ_x)`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PauliCoefficients {
    pub identity: f64,
    pub z: f64,
    pub y: f64,
    pub x: f64,
}

impl PauliCoefficients {
    /// `[γ0, γ1, γ2, γ3]` in the `(I, σ_z, σ_y, σ_x)` order.
    pub fn as_array(&self) -> [f64; 4] {
        [self.identity, self.z, self.y, self.x]
    }
}

pub fn pauli_decompose(op: &HermitianOperator) -> Result<PauliCoefficients> {
    if op.dim() != 2 {
        return invalid(format!(
            "pauli_decompose needs a 2x2 operator, got dim {}",
            op.dim()
        ));
    }
    let coeff = |p: &HermitianOperator| 0.5 * op.matmul(p).trace().re;
    Ok(PauliCoefficients {
        identity: 0.5 * op.trace(),
        z: coeff(&HermitianOperator::pauli_z()),
        y: coeff(&HermitianOperator::pauli_y()),
        x: coeff(&HermitianOperator::pauli_x()),
    })
}

/// Kronecker product of two qubit operators.
pub fn tensor(a: &HermitianOperator, b: &HermitianOperator) -> Result<HermitianOperator> {
    if a.dim() != 2 || b.dim() != 2 {
        return invalid(format!(
            "tensor needs two 2x2 operators, got dims {} and {}",
            a.dim(),
            b.dim()
        ));
    }
    Ok(HermitianOperator::from_trusted(
        a.entries.kronecker(&b.entries),
    ))
}

/// A unit-trace positive semidefinite operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOperator,
}

impl DensityMatrix {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > ALGEBRA_TOL {
            return invalid(format!("density matrix trace is {tr}, expected 1"));
        }
        let min = op.eigenvalues()[0];
        if min < -EIGEN_TOL {
            return invalid(format!("density matrix has negative eigenvalue {min:e}"));
        }
        Ok(Self { op })
    }

    /// `|ψ⟩⟨ψ|` for a vector of length 2 or 4; the vector is normalized first.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let v = DVector::from_column_slice(amplitudes);
        let norm = v.norm();
        if norm == 0.0 {
            return invalid("zero state vector");
        }
        let v = v / Complex64::new(norm, 0.0);
        Self::new(HermitianOperator::new(&v * v.adjoint())?)
    }

    /// `(|00⟩ + |11⟩)/√2`.
    pub fn phi_plus() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::pure(&[h, ZERO, ZERO, h]).expect("phi_plus is a valid state")
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::new(HermitianOperator::identity(dim) * (1.0 / dim as f64))
            .expect("I/d is a valid state")
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }
}

/// Outcome labels for an input with `n` outcomes.
pub fn outcome_labels(n: usize) -> Vec<i32> {
    if n == 2 {
        vec![1, -1]
    } else {
        (1..=n as i32).collect()
    }
}

/// Position of `label` among the labels of an `n`-outcome input.
pub fn label_index(n: usize, label: i32) -> Option<usize> {
    outcome_labels(n).iter().position(|&l| l == label)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementKind {
    Projective,
    General,
}

/// An ordered list of qubit effects summing to the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    effects: Vec<HermitianOperator>,
    kind: MeasurementKind,
    labels: Vec<i32>,
}

impl Measurement {
    pub fn new(effects: Vec<HermitianOperator>, kind: MeasurementKind) -> Result<Self> {
        if effects.is_empty() {
            return invalid("measurement has no effects");
        }
        if let Some(e) = effects.iter().find(|e| e.dim() != 2) {
            return invalid(format!(
                "measurement effects must be 2x2, got dim {}",
                e.dim()
            ));
        }
        let sum = effects
            .iter()
            .fold(HermitianOperator::zero(2), |acc, e| &acc + e);
        let dev = sum.max_abs_diff(&HermitianOperator::identity(2));
        if dev > ALGEBRA_TOL {
            return invalid(format!(
                "effects do not sum to identity (deviation {dev:e})"
            ));
        }
        for (k, e) in effects.iter().enumerate() {
            let ev = e.eigenvalues();
            if ev[0] < -EIGEN_TOL || ev[1] > 1.0 + EIGEN_TOL {
                return invalid(format!("effect {k} has eigenvalues {ev:?} outside [0, 1]"));
            }
            if kind == MeasurementKind::Projective {
                let sq = HermitianOperator::from_trusted(e.matmul(e));
                let dev = sq.max_abs_diff(e);
                if dev > ALGEBRA_TOL {
                    return invalid(format!("effect {k} is not a projector (deviation {dev:e})"));
                }
            }
        }
        let labels = outcome_labels(effects.len());
        Ok(Self {
            effects,
            kind,
            labels,
        })
    }

    /// Two-outcome projective measurement `{(I+O)/2, (I−O)/2}` of a ±1 observable.
    pub fn observable(o: &HermitianOperator) -> Result<Self> {
        let id = HermitianOperator::identity(2);
        Self::new(
            vec![(&id + o) * 0.5, (&id - o) * 0.5],
            MeasurementKind::Projective,
        )
    }

    pub fn povm(effects: Vec<HermitianOperator>) -> Result<Self> {
        Self::new(effects, MeasurementKind::General)
    }

    pub fn effects(&self) -> &[HermitianOperator] {
        &self.effects
    }

    pub fn kind(&self) -> MeasurementKind {
        self.kind
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn outcome_count(&self) -> usize {
        self.effects.len()
    }

    pub fn effect(&self, label: i32) -> Option<&HermitianOperator> {
        label_index(self.effects.len(), label).map(|k| &self.effects[k])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Party {
    Alice,
    Bob,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Alice => "A",
            Party::Bob => "B",
        })
    }
}

/// One entry `p(a, b | i, j)` of a behavior: outcome labels and zero-based inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProbabilityCell {
    pub a: i32,
    pub b: i32,
    pub i: usize,
    pub j: usize,
}

impl ProbabilityCell {
    pub const fn new(a: i32, b: i32, i: usize, j: usize) -> Self {
        Self { a, b, i, j }
    }
}

impl fmt::Display for ProbabilityCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "p({},{}|A{},B{})",
            self.a,
            self.b,
            self.i + 1,
            self.j + 1
        )
    }
}

/// Serialized scenario layout shared by inequality and behavior files.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub alice_inputs: usize,
    pub bob_inputs: usize,
    pub alice_outcomes: Vec<usize>,
    pub bob_outcomes: Vec<usize>,
}

/// Input and outcome counts of a bipartite Bell scenario.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioDocument", into = "ScenarioDocument")]
pub struct Scenario {
    alice_outcomes: Vec<usize>,
    bob_outcomes: Vec<usize>,
    offsets: Vec<usize>,
}

impl Scenario {
    pub fn new(alice_outcomes: Vec<usize>, bob_outcomes: Vec<usize>) -> Result<Self> {
        if alice_outcomes.is_empty() || bob_outcomes.is_empty() {
            return invalid("each party needs at least one input");
        }
        if alice_outcomes.iter().chain(&bob_outcomes).any(|&n| n < 2) {
            return invalid("every input needs at least two outcomes");
        }
        let mut offsets = Vec::with_capacity(alice_outcomes.len() * bob_outcomes.len() + 1);
        let mut acc = 0;
        for &na in &alice_outcomes {
            for &nb in &bob_outcomes {
                offsets.push(acc);
                acc += na * nb;
            }
        }
        offsets.push(acc);
        Ok(Self {
            alice_outcomes,
            bob_outcomes,
            offsets,
        })
    }

    /// Every input of both parties has the same number of outcomes.
    pub fn uniform(alice_inputs: usize, bob_inputs: usize, outcomes: usize) -> Result<Self> {
        Self::new(vec![outcomes; alice_inputs], vec![outcomes; bob_inputs])
    }

    pub fn alice_inputs(&self) -> usize {
        self.alice_outcomes.len()
    }

    pub fn bob_inputs(&self) -> usize {
        self.bob_outcomes.len()
    }

    pub fn alice_outcomes(&self) -> &[usize] {
        &self.alice_outcomes
    }

    pub fn bob_outcomes(&self) -> &[usize] {
        &self.bob_outcomes
    }

    pub fn inputs(&self, party: Party) -> usize {
        self.outcomes(party).len()
    }

    pub fn outcomes(&self, party: Party) -> &[usize] {
        match party {
            Party::Alice => &self.alice_outcomes,
            Party::Bob => &self.bob_outcomes,
        }
    }

    /// Total number of table entries.
    pub fn cell_count(&self) -> usize {
        *self.offsets.last().expect("offsets are never empty")
    }

    fn block(&self, i: usize, j: usize) -> usize {
        self.offsets[i * self.bob_inputs() + j]
    }

    /// Flat table position of an outcome-index quadruple. Panics when out of range.
    pub fn flat_index(&self, i: usize, j: usize, ai: usize, bi: usize) -> usize {
        assert!(i < self.alice_inputs() && j < self.bob_inputs());
        assert!(ai < self.alice_outcomes[i] && bi < self.bob_outcomes[j]);
        self.block(i, j) + ai * self.bob_outcomes[j] + bi
    }

    /// Outcome indices `(ai, bi)` of a labelled cell, checking every range.
    pub fn locate(&self, cell: &ProbabilityCell) -> Result<(usize, usize)> {
        if cell.i >= self.alice_inputs() || cell.j >= self.bob_inputs() {
            return invalid(format!(
                "{cell} references an input outside the {}x{} scenario",
                self.alice_inputs(),
                self.bob_inputs()
            ));
        }
        let ai = label_index(self.alice_outcomes[cell.i], cell.a);
        let bi = label_index(self.bob_outcomes[cell.j], cell.b);
        match (ai, bi) {
            (Some(ai), Some(bi)) => Ok((ai, bi)),
            _ => invalid(format!(
                "{cell} uses an outcome label not valid for its input"
            )),
        }
    }

    pub fn index_of(&self, cell: &ProbabilityCell) -> Result<usize> {
        let (ai, bi) = self.locate(cell)?;
        Ok(self.flat_index(cell.i, cell.j, ai, bi))
    }

    /// All cells in table order.
    pub fn cells(&self) -> Vec<ProbabilityCell> {
        let mut out = Vec::with_capacity(self.cell_count());
        for (i, &na) in self.alice_outcomes.iter().enumerate() {
            for (j, &nb) in self.bob_outcomes.iter().enumerate() {
                for &a in &outcome_labels(na) {
                    for &b in &outcome_labels(nb) {
                        out.push(ProbabilityCell::new(a, b, i, j));
                    }
                }
            }
        }
        out
    }

    pub fn is_two_outcome(&self, party: Party, input: usize) -> bool {
        self.outcomes(party).get(input) == Some(&2)
    }
}

impl TryFrom<ScenarioDocument> for Scenario {
    type Error = Error;
    fn try_from(doc: ScenarioDocument) -> Result<Self> {
        if doc.alice_outcomes.len() != doc.alice_inputs || doc.bob_outcomes.len() != doc.bob_inputs
        {
            return invalid("scenario outcome lists must have one entry per input");
        }
        Scenario::new(doc.alice_outcomes, doc.bob_outcomes)
    }
}

impl From<Scenario> for ScenarioDocument {
    fn from(s: Scenario) -> Self {
        ScenarioDocument {
            alice_inputs: s.alice_inputs(),
            bob_inputs: s.bob_inputs(),
            alice_outcomes: s.alice_outcomes,
            bob_outcomes: s.bob_outcomes,
        }
    }
}

/// State and local measurements of a two-qubit Bell experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    pub state: DensityMatrix,
    pub alice: Vec<Measurement>,
    pub bob: Vec<Measurement>,
}

impl Realization {
    pub fn new(
        state: DensityMatrix,
        alice: Vec<Measurement>,
        bob: Vec<Measurement>,
    ) -> Result<Self> {
        if state.dim() != 4 {
            return invalid("realization state must be a two-qubit (4x4) density matrix");
        }
        if alice.is_empty() || bob.is_empty() {
            return invalid("each party needs at least one measurement");
        }
        Ok(Self { state, alice, bob })
    }

    pub fn scenario(&self) -> Scenario {
        Scenario::new(
            self.alice.iter().map(Measurement::outcome_count).collect(),
            self.bob.iter().map(Measurement::outcome_count).collect(),
        )
        .expect("measurements always have at least two outcomes")
    }

    pub fn with_alice(mut self, m: Measurement) -> Self {
        self.alice.push(m);
        self
    }

    pub fn with_bob(mut self, m: Measurement) -> Self {
        self.bob.push(m);
        self
    }

    pub fn measurement(&self, party: Party, input: usize) -> Result<&Measurement> {
        let list = match party {
            Party::Alice => &self.alice,
            Party::Bob => &self.bob,
        };
        list.get(input)
            .ok_or_else(|| Error::Validation(format!("{party} has no input {}", input + 1)))
    }

    /// Born probability of one labelled cell.
    pub fn probability(&self, cell: &ProbabilityCell) -> Result<f64> {
        let ma = self.measurement(Party::Alice, cell.i)?;
        let mb = self.measurement(Party::Bob, cell.j)?;
        let ea = ma
            .effect(cell.a)
            .ok_or_else(|| Error::Validation(format!("{cell}: no Alice outcome {}", cell.a)))?;
        let eb = mb
            .effect(cell.b)
            .ok_or_else(|| Error::Validation(format!("{cell}: no Bob outcome {}", cell.b)))?;
        born_joint(&self.state, ea, eb)
    }
}

/// `tr(ρ · a⊗b)` without clamping; `a`, `b` may be arbitrary Hermitian operators.
pub fn expectation(
    state: &DensityMatrix,
    a: &HermitianOperator,
    b: &HermitianOperator,
) -> Result<f64> {
    let ab = tensor(a, b)?;
    if state.dim() != 4 {
        return invalid("joint expectation needs a two-qubit state");
    }
    let z = (state.op().entries() * ab.entries()).trace();
    if z.im.abs() > ALGEBRA_TOL {
        return invalid(format!("expectation has imaginary part {:e}", z.im));
    }
    Ok(z.re)
}

/// Joint outcome probability `tr(ρ · ea⊗eb)`, clamped to `[0, 1]`.
pub fn born_joint(
    state: &DensityMatrix,
    ea: &HermitianOperator,
    eb: &HermitianOperator,
) -> Result<f64> {
    let p = expectation(state, ea, eb)?;
    if !(-ALGEBRA_TOL..=1.0 + ALGEBRA_TOL).contains(&p) {
        return invalid(format!(
            "Born probability {p} outside [0, 1]; effects are not valid"
        ));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// The full probability table `p(a, b | i, j)` of a scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Behavior {
    scenario: Scenario,
    table: Vec<f64>,
}

impl Behavior {
    pub fn new(scenario: Scenario, mut table: Vec<f64>) -> Result<Self> {
        if table.len() != scenario.cell_count() {
            return invalid(format!(
                "behavior table has {} entries, scenario needs {}",
                table.len(),
                scenario.cell_count()
            ));
        }
        for (k, p) in table.iter_mut().enumerate() {
            if !p.is_finite() || *p < -ALGEBRA_TOL || *p > 1.0 + ALGEBRA_TOL {
                return invalid(format!("behavior entry {k} = {p} is outside [0, 1]"));
            }
            *p = p.clamp(0.0, 1.0);
        }
        for i in 0..scenario.alice_inputs() {
            for j in 0..scenario.bob_inputs() {
                let start = scenario.block(i, j);
                let len = scenario.alice_outcomes[i] * scenario.bob_outcomes[j];
                let sum: f64 = table[start..start + len].iter().sum();
                if (sum - 1.0).abs() > NORMALIZATION_TOL {
                    return invalid(format!(
                        "probabilities for inputs (A{}, B{}) sum to {sum}",
                        i + 1,
                        j + 1
                    ));
                }
            }
        }
        Ok(Self { scenario, table })
    }

    /// Every outcome pair equally likely.
    pub fn uniform(scenario: Scenario) -> Self {
        let mut table = Vec::with_capacity(scenario.cell_count());
        for &na in &scenario.alice_outcomes {
            for &nb in &scenario.bob_outcomes {
                let p = 1.0 / (na * nb) as f64;
                table.extend(std::iter::repeat_n(p, na * nb));
            }
        }
        Self { scenario, table }
    }

    /// Local deterministic behavior; strategies give one outcome index per input.
    pub fn deterministic(scenario: Scenario, alice: &[usize], bob: &[usize]) -> Result<Self> {
        if alice.len() != scenario.alice_inputs() || bob.len() != scenario.bob_inputs() {
            return invalid("deterministic strategy must assign one outcome per input");
        }
        if alice
            .iter()
            .zip(&scenario.alice_outcomes)
            .any(|(&o, &n)| o >= n)
            || bob
                .iter()
                .zip(&scenario.bob_outcomes)
                .any(|(&o, &n)| o >= n)
        {
            return invalid("deterministic strategy outcome index out of range");
        }
        let mut table = vec![0.0; scenario.cell_count()];
        for (i, &ai) in alice.iter().enumerate() {
            for (j, &bi) in bob.iter().enumerate() {
                table[scenario.flat_index(i, j, ai, bi)] = 1.0;
            }
        }
        Ok(Self { scenario, table })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn prob(&self, cell: &ProbabilityCell) -> Result<f64> {
        Ok(self.table[self.scenario.index_of(cell)?])
    }

    pub fn prob_at(&self, i: usize, j: usize, ai: usize, bi: usize) -> f64 {
        self.table[self.scenario.flat_index(i, j, ai, bi)]
    }

    /// `λ·self + (1−λ)·other`.
    pub fn mix(&self, other: &Behavior, lambda: f64) -> Result<Self> {
        if self.scenario != other.scenario {
            return invalid("cannot mix behaviors of different scenarios");
        }
        if !(0.0..=1.0).contains(&lambda) {
            return invalid(format!("mixing weight {lambda} outside [0, 1]"));
        }
        let table = self
            .table
            .iter()
            .zip(&other.table)
            .map(|(p, q)| lambda * p + (1.0 - lambda) * q)
            .collect();
        Behavior::new(self.scenario.clone(), table)
    }

    /// The `na × nb` block of joint probabilities for inputs `(i, j)`.
    pub fn joint_table(&self, i: usize, j: usize) -> Result<Vec<Vec<f64>>> {
        if i >= self.scenario.alice_inputs() || j >= self.scenario.bob_inputs() {
            return invalid(format!("no input pair (A{}, B{})", i + 1, j + 1));
        }
        let (na, nb) = (
            self.scenario.alice_outcomes[i],
            self.scenario.bob_outcomes[j],
        );
        Ok((0..na)
            .map(|ai| (0..nb).map(|bi| self.prob_at(i, j, ai, bi)).collect())
            .collect())
    }

    /// `p(a | i)` computed from the block of Bob input `j`.
    pub fn alice_marginal(&self, i: usize, j: usize, a: i32) -> Result<f64> {
        let rows = self.joint_table(i, j)?;
        let ai = label_index(rows.len(), a)
            .ok_or_else(|| Error::Validation(format!("A{} has no outcome {a}", i + 1)))?;
        Ok(rows[ai].iter().sum())
    }

    /// `p(b | j)` computed from the block of Alice input `i`.
    pub fn bob_marginal(&self, i: usize, j: usize, b: i32) -> Result<f64> {
        let rows = self.joint_table(i, j)?;
        let bi = label_index(rows[0].len(), b)
            .ok_or_else(|| Error::Validation(format!("B{} has no outcome {b}", j + 1)))?;
        Ok(rows.iter().map(|r| r[bi]).sum())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: BehaviorDocument = parse_json(text)?;
        doc.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&BehaviorDocument::from(self)).expect("behavior serializes")
    }
}

/// One row of a behavior file. Inputs are one-based, outcomes are labels.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorEntry {
    pub i: usize,
    pub j: usize,
    pub a: i32,
    pub b: i32,
    pub p: f64,
}

/// Behavior file schema: the scenario plus one entry per table cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorDocument {
    pub scenario: Scenario,
    pub table: Vec<BehaviorEntry>,
}

impl From<&Behavior> for BehaviorDocument {
    fn from(b: &Behavior) -> Self {
        let table = b
            .scenario
            .cells()
            .into_iter()
            .zip(&b.table)
            .map(|(c, &p)| BehaviorEntry {
                i: c.i + 1,
                j: c.j + 1,
                a: c.a,
                b: c.b,
                p,
            })
            .collect();
        Self {
            scenario: b.scenario.clone(),
            table,
        }
    }
}

impl TryFrom<BehaviorDocument> for Behavior {
    type Error = Error;
    fn try_from(doc: BehaviorDocument) -> Result<Self> {
        let scenario = doc.scenario;
        let mut table = vec![f64::NAN; scenario.cell_count()];
        for (row, e) in doc.table.iter().enumerate() {
            if e.i == 0 || e.j == 0 {
                return invalid(format!("table[{row}]: inputs are one-based"));
            }
            let cell = ProbabilityCell::new(e.a, e.b, e.i - 1, e.j - 1);
            let k = scenario
                .index_of(&cell)
                .map_err(|err| Error::Validation(format!("table[{row}]: {err}")))?;
            if !table[k].is_nan() {
                return invalid(format!("table[{row}]: duplicate entry for {cell}"));
            }
            table[k] = e.p;
        }
        if let Some(k) = table.iter().position(|p| p.is_nan()) {
            return invalid(format!("behavior table is missing {}", scenario.cells()[k]));
        }
        Behavior::new(scenario, table)
    }
}

/// Born-rule behavior of a realization over every input pair and outcome.
pub fn behavior_from_realization(r: &Realization) -> Result<Behavior> {
    let scenario = r.scenario();
    let mut table = Vec::with_capacity(scenario.cell_count());
    for ma in &r.alice {
        for mb in &r.bob {
            for ea in ma.effects() {
                for eb in mb.effects() {
                    table.push(born_joint(&r.state, ea, eb)?);
                }
            }
        }
    }
    Behavior::new(scenario, table)
}

/// `⟨A_i B_j⟩ = Σ a·b·p(a, b | i, j)` for two-outcome inputs.
pub fn correlator(b: &Behavior, i: usize, j: usize) -> Result<f64> {
    let s = b.scenario();
    if !s.is_two_outcome(Party::Alice, i) || !s.is_two_outcome(Party::Bob, j) {
        return invalid(format!(
            "correlator needs two-outcome inputs, got (A{}, B{})",
            i + 1,
            j + 1
        ));
    }
    let mut sum = 0.0;
    for a in [1, -1] {
        for bl in [1, -1] {
            sum += (a * bl) as f64 * b.prob(&ProbabilityCell::new(a, bl, i, j))?;
        }
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    const S3: f64 = 1.732_050_807_568_877_2;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn identity_decomposes_to_basis_vector() {
        let c = pauli_decompose(&HermitianOperator::identity(2)).unwrap();
        assert_eq!(c.as_array(), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn povm_effects_decompose() {
        let id = HermitianOperator::identity(2);
        let (x, z) = (HermitianOperator::pauli_x(), HermitianOperator::pauli_z());
        let a1 = (&(&(&id * 2.0) - &x) - &(&z * S3)) * (1.0 / 6.0);
        let c = pauli_decompose(&a1).unwrap().as_array();
        for (got, want) in c.iter().zip([1.0 / 3.0, -S3 / 6.0, 0.0, -1.0 / 6.0]) {
            assert_close(*got, want, 1e-12);
        }
        let a2 = (&id + &x) * (1.0 / 3.0);
        let c = pauli_decompose(&a2).unwrap().as_array();
        for (got, want) in c.iter().zip([1.0 / 3.0, 0.0, 0.0, 1.0 / 3.0]) {
            assert_close(*got, want, 1e-12);
        }
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        assert!(matches!(
            HermitianOperator::new(m),
            Err(Error::Validation(_))
        ));
        let m = DMatrix::<Complex64>::identity(3, 3);
        assert!(HermitianOperator::new(m).is_err());
    }

    #[test]
    fn tensor_products() {
        let id = HermitianOperator::identity(2);
        assert_eq!(tensor(&id, &id).unwrap(), HermitianOperator::identity(4));
        let zz = tensor(&HermitianOperator::pauli_z(), &HermitianOperator::pauli_z()).unwrap();
        let diag = HermitianOperator::from_real(
            4,
            &[
                1., 0., 0., 0., 0., -1., 0., 0., 0., 0., -1., 0., 0., 0., 0., 1.,
            ],
        )
        .unwrap();
        assert_eq!(zz, diag);
        let x = HermitianOperator::pauli_x();
        assert_close(
            expectation(&DensityMatrix::phi_plus(), &x, &x).unwrap(),
            1.0,
            1e-12,
        );
        assert_close(
            born_joint(&DensityMatrix::phi_plus(), &x, &x).unwrap(),
            1.0,
            1e-12,
        );
        assert!(tensor(&zz, &id).is_err());
    }

    #[test]
    fn born_rule_examples() {
        let rho = DensityMatrix::phi_plus();
        let id = HermitianOperator::identity(2);
        let up = (&id + &HermitianOperator::pauli_z()) * 0.5;
        assert_close(born_joint(&rho, &up, &up).unwrap(), 0.5, 1e-12);
        assert_close(born_joint(&rho, &id, &id).unwrap(), 1.0, 1e-12);
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(HermitianOperator::identity(4)).is_err());
        let neg = HermitianOperator::from_real(2, &[1.5, 0.0, 0.0, -0.5]).unwrap();
        assert!(DensityMatrix::new(neg).is_err());
        assert_eq!(DensityMatrix::maximally_mixed(4).dim(), 4);
    }

    #[test]
    fn measurement_validation() {
        let id = HermitianOperator::identity(2);
        assert!(Measurement::povm(vec![id.clone() * 0.5, id.clone() * 0.4]).is_err());
        assert!(Measurement::new(
            vec![id.clone() * 0.5, id.clone() * 0.5],
            MeasurementKind::Projective
        )
        .is_err());
        let m = Measurement::observable(&HermitianOperator::pauli_x()).unwrap();
        assert_eq!(m.labels(), &[1, -1]);
        let p = Measurement::povm(vec![id.clone() * 0.5, id.clone() * 0.25, id * 0.25]).unwrap();
        assert_eq!(p.labels(), &[1, 2, 3]);
        assert!(p.effect(-1).is_none());
    }

    #[test]
    fn maximally_mixed_gives_uniform_behavior() {
        let obs = |o: HermitianOperator| Measurement::observable(&o).unwrap();
        let r = Realization::new(
            DensityMatrix::maximally_mixed(4),
            vec![
                obs(HermitianOperator::pauli_z()),
                obs(HermitianOperator::pauli_x()),
            ],
            vec![obs(HermitianOperator::pauli_x())],
        )
        .unwrap();
        let b = behavior_from_realization(&r).unwrap();
        assert!(b.table().iter().all(|&p| (p - 0.25).abs() < 1e-12));
        assert_close(correlator(&b, 1, 0).unwrap(), 0.0, 1e-12);
    }

    #[test]
    fn correlator_rejects_three_outcome_input() {
        let s = Scenario::new(vec![3], vec![2]).unwrap();
        let b = Behavior::uniform(s);
        assert!(matches!(correlator(&b, 0, 0), Err(Error::Validation(_))));
    }

    #[test]
    fn behavior_rejects_unnormalized_tables() {
        let s = Scenario::uniform(1, 1, 2).unwrap();
        assert!(Behavior::new(s.clone(), vec![0.5, 0.5, 0.5, 0.0]).is_err());
        assert!(Behavior::new(s.clone(), vec![1.2, -0.2, 0.0, 0.0]).is_err());
        assert!(Behavior::new(s, vec![0.25; 3]).is_err());
    }

    #[test]
    fn behavior_json_round_trip() {
        let s = Scenario::new(vec![2, 3], vec![2]).unwrap();
        let b = Behavior::uniform(s);
        let back = Behavior::from_json(&b.to_json()).unwrap();
        assert_eq!(b, back);
    }

    #[test]
    fn behavior_json_errors() {
        let missing = r#"{"scenario":{"alice_inputs":1,"bob_inputs":1,"alice_outcomes":[2],"bob_outcomes":[2]},
            "table":[{"i":1,"j":1,"a":1,"b":1,"p":1.0}]}"#;
        assert!(matches!(
            Behavior::from_json(missing),
            Err(Error::Validation(_))
        ));
        let bad = r#"{"scenario":{"alice_inputs":1,"bob_inputs":1,"alice_outcomes":[2],"bob_outcomes":[2]},
            "table":[{"i":1,"j":1,"a":1,"b":"x","p":1.0}]}"#;
        match Behavior::from_json(bad) {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "table[0].b"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}

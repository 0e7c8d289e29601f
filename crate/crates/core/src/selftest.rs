//! Reference realizations of the chained inequality, antialigned
//! three-outcome POVMs, extremality certificates and Bloch-coefficient
//! extraction from observed behaviors.

use nalgebra::DMatrix;

use crate::bellcat::SQRT3;
use crate::error::{invalid, Error, Result};
use crate::qcore::{
    pauli_decompose, Behavior, DensityMatrix, HermitianOperator, Measurement, Party,
    PauliCoefficients, ProbabilityCell, Realization, EIGEN_TOL,
};

/// Residual below which antialignment is considered certified.
pub const ANTIALIGNMENT_TOL: f64 = 1e-10;
/// Smallest singular value separating independent effects from dependent ones.
pub const INDEPENDENCE_TOL: f64 = 1e-8;
/// Allowed spread of the POVM marginal across Bob's inputs.
pub const SIGNALING_TOL: f64 = 1e-8;

const UNIT_TOL: f64 = 1e-10;

/// Bloch directions of Alice's three observables `A1, A2, A3`.
pub fn alice_directions() -> [[f64; 3]; 3] {
    [
        [0.0, 0.0, 1.0],
        [SQRT3 / 2.0, 0.0, 0.5],
        [SQRT3 / 2.0, 0.0, -0.5],
    ]
}

/// Bloch directions of Bob's three observables `B1, B2, B3`.
pub fn bob_directions() -> [[f64; 3]; 3] {
    [
        [0.5, 0.0, SQRT3 / 2.0],
        [1.0, 0.0, 0.0],
        [0.5, 0.0, -SQRT3 / 2.0],
    ]
}

fn neg(v: [f64; 3]) -> [f64; 3] {
    [-v[0], -v[1], -v[2]]
}

/// Directions of Bob's projectors `B_{+1|1}`, `B_{-1|2}`, `B_{+1|3}` that
/// Alice's POVM must be antialigned with.
pub fn a4_directions() -> [[f64; 3]; 3] {
    let b = bob_directions();
    [b[0], neg(b[1]), b[2]]
}

/// Directions of Alice's projectors `A_{-1|1}`, `A_{+1|2}`, `A_{-1|3}` that
/// Bob's POVM must be antialigned with.
pub fn b4_directions() -> [[f64; 3]; 3] {
    let a = alice_directions();
    [neg(a[0]), a[1], neg(a[2])]
}

fn observables(dirs: [[f64; 3]; 3]) -> Vec<Measurement> {
    dirs.iter()
        .map(|&d| {
            Measurement::observable(&HermitianOperator::bloch(d)).expect("unit xz directions")
        })
        .collect()
}

/// `|φ₊⟩` with the three measurement pairs maximally violating the chained inequality.
pub fn reference_realization_c3() -> Realization {
    Realization::new(
        DensityMatrix::phi_plus(),
        observables(alice_directions()),
        observables(bob_directions()),
    )
    .expect("reference realization is valid")
}

/// The three-outcome POVM for Alice antialigned with Bob's reference projectors.
pub fn alice_povm() -> Measurement {
    antialigned_povm(a4_directions()).expect("reference directions sum to zero")
}

/// The three-outcome POVM for Bob antialigned with Alice's reference projectors.
pub fn bob_povm() -> Measurement {
    antialigned_povm(b4_directions()).expect("reference directions sum to zero")
}

/// Reference realization with Alice's POVM as her fourth input.
pub fn reference_realization_local() -> Realization {
    reference_realization_c3().with_alice(alice_povm())
}

/// Reference realization with both POVMs as fourth inputs.
pub fn reference_realization_global() -> Realization {
    reference_realization_local().with_bob(bob_povm())
}

/// Effects `E_k = (I − n̂_k·σ)/3` for three unit directions summing to zero.
pub fn antialigned_povm(directions: [[f64; 3]; 3]) -> Result<Measurement> {
    for (k, d) in directions.iter().enumerate() {
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::Construction(format!(
                "direction {} has norm {norm}, expected 1",
                k + 1
            )));
        }
    }
    let sum: Vec<f64> = (0..3)
        .map(|c| directions.iter().map(|d| d[c]).sum())
        .collect();
    if sum.iter().any(|s| s.abs() > UNIT_TOL) {
        return Err(Error::Construction(format!(
            "directions sum to {sum:?}; weights 1/3 cannot complete to the identity"
        )));
    }
    let id = HermitianOperator::identity(2);
    let effects = directions
        .iter()
        .map(|&d| (&id - &HermitianOperator::bloch(d)) * (1.0 / 3.0))
        .collect();
    Measurement::povm(effects)
        .map_err(|e| Error::Construction(format!("antialigned effects are not a measurement: {e}")))
}

/// Largest Born probability among `targets`; zero means perfect antialignment.
pub fn verify_antialignment(r: &Realization, targets: &[ProbabilityCell]) -> Result<f64> {
    targets
        .iter()
        .try_fold(0.0_f64, |acc, cell| Ok(acc.max(r.probability(cell)?)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PovmCertificate {
    pub povm: Measurement,
    /// Set when the certificate was produced against a realization.
    pub antialignment_residual: Option<f64>,
    pub extremal: bool,
    pub rank_profile: Vec<usize>,
    pub smallest_singular_value: f64,
}

impl PovmCertificate {
    /// Extremal and, when checked, antialigned within [`ANTIALIGNMENT_TOL`].
    pub fn passes(&self) -> bool {
        self.extremal
            && self
                .antialignment_residual
                .is_none_or(|r| r <= ANTIALIGNMENT_TOL)
    }
}

/// Rank-one, linearly independent effects characterise extremal qubit POVMs.
pub fn is_extremal_qubit_povm(m: &Measurement) -> PovmCertificate {
    let rank_profile: Vec<usize> = m
        .effects()
        .iter()
        .map(|e| e.eigenvalues().iter().filter(|&&v| v > EIGEN_TOL).count())
        .collect();
    let n = m.outcome_count();
    let rows: Vec<f64> = m
        .effects()
        .iter()
        .flat_map(|e| pauli_decompose(e).expect("effects are 2x2").as_array())
        .collect();
    let stacked = DMatrix::from_row_slice(n, 4, &rows);
    let svd = stacked.svd(false, false);
    let smallest = if n > 4 {
        0.0
    } else {
        svd.singular_values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    };
    let extremal = rank_profile.iter().all(|&r| r == 1) && smallest > INDEPENDENCE_TOL;
    PovmCertificate {
        povm: m.clone(),
        antialignment_residual: None,
        extremal,
        rank_profile,
        smallest_singular_value: smallest,
    }
}

/// Validates raw effects as a POVM, then certifies extremality.
pub fn certify_effects(effects: Vec<HermitianOperator>) -> Result<PovmCertificate> {
    Ok(is_extremal_qubit_povm(&Measurement::povm(effects)?))
}

/// Extremality plus antialignment of one input of a realization.
pub fn certify_povm(
    r: &Realization,
    party: Party,
    input: usize,
    targets: &[ProbabilityCell],
) -> Result<PovmCertificate> {
    let mut cert = is_extremal_qubit_povm(r.measurement(party, input)?);
    cert.antialignment_residual = Some(verify_antialignment(r, targets)?);
    Ok(cert)
}

/// Identity weight and Bloch components of a qubit effect.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector {
    pub weight: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn from_pauli(c: PauliCoefficients) -> Self {
        Self {
            weight: c.identity,
            x: c.x,
            y: c.y,
            z: c.z,
        }
    }

    pub fn pauli(&self) -> PauliCoefficients {
        PauliCoefficients {
            identity: self.weight,
            z: self.z,
            y: self.y,
            x: self.x,
        }
    }

    pub fn to_operator(&self) -> HermitianOperator {
        HermitianOperator::from_pauli(self.pauli())
    }

    pub fn length(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// `0 ≤ weight ≤ 1` and `|r| ≤ min(weight, 1 − weight)`.
    pub fn is_valid_effect(&self) -> bool {
        (0.0..=1.0).contains(&self.weight)
            && self.length() <= self.weight.min(1.0 - self.weight) + EIGEN_TOL
    }
}

/// Reconstructs the Bloch coefficients of a three-outcome input of Alice from
/// its correlations with Bob's three reference inputs:
///
/// ```text
/// weight = p(k | povm)
/// z = (E_1 − E_3)/√3,  y = −E_1 + E_2 − E_3,  x = E_2,
/// E_j = Σ_b b·p(k, b | povm, bob_inputs[j])
/// ```
///
/// Only meaningful when Bob's inputs act as the reference observables on a
/// maximally entangled pair.
pub fn bloch_from_behavior(
    b: &Behavior,
    povm_input: usize,
    bob_inputs: [usize; 3],
) -> Result<Vec<BlochVector>> {
    let s = b.scenario();
    if povm_input >= s.alice_inputs() {
        return invalid(format!("Alice has no input {}", povm_input + 1));
    }
    for &j in &bob_inputs {
        if !s.is_two_outcome(Party::Bob, j) {
            return invalid(format!(
                "Bob input {} must exist and have two outcomes",
                j + 1
            ));
        }
    }
    let labels = crate::qcore::outcome_labels(s.alice_outcomes()[povm_input]);
    labels
        .iter()
        .map(|&k| {
            let marginals = bob_inputs
                .iter()
                .map(|&j| b.alice_marginal(povm_input, j, k))
                .collect::<Result<Vec<_>>>()?;
            let spread = marginals
                .iter()
                .fold(0.0_f64, |m, p| m.max((p - marginals[0]).abs()));
            if spread > SIGNALING_TOL {
                return Err(Error::Signaling(format!(
                    "p({k}|A{}) varies by {spread:e} across Bob's inputs",
                    povm_input + 1
                )));
            }
            let e = bob_inputs
                .iter()
                .map(|&j| {
                    Ok(b.prob(&ProbabilityCell::new(k, 1, povm_input, j))?
                        - b.prob(&ProbabilityCell::new(k, -1, povm_input, j))?)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(BlochVector {
                weight: marginals[0],
                z: (e[0] - e[2]) / SQRT3,
                y: -e[0] + e[1] - e[2],
                x: e[1],
            })
        })
        .collect()
}

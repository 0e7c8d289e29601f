//! Certified guessing probabilities and min-entropy at maximal violation of
//! the POVM-penalised chained expressions.
//!
//! Certification is all-or-nothing: a behavior that does not reach `3√3`
//! within the caller's tolerance certifies nothing (guessing probability 1).

use serde::Serialize;

use crate::bellcat::{
    build_c3_double_prime, build_c3_prime, BellFunctional, C3_DOUBLE_PRIME_PENALTY_CELLS,
    C3_PRIME_PENALTY_CELLS, C3_QUANTUM_BOUND,
};
use crate::error::{invalid, Result};
use crate::qcore::{Behavior, Scenario};

/// Default tolerance on the gap to `3√3` for analytic behaviors.
pub const DEFAULT_CERTIFICATION_TOL: f64 = 1e-9;

/// Eve's guessing probability for Alice's extremal POVM once C3′ is maximal.
pub const LOCAL_GUESSING_PROBABILITY: f64 = 1.0 / 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomnessMode {
    Local,
    Global,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertifiedRandomness {
    pub guessing_probability: f64,
    pub min_entropy_bits: f64,
    pub mode: RandomnessMode,
    pub certified: bool,
    /// Observed value of the certifying functional.
    pub observed_value: f64,
    /// `3√3 − observed_value`.
    pub violation_gap: f64,
}

impl CertifiedRandomness {
    fn new(
        mode: RandomnessMode,
        observed_value: f64,
        tol: f64,
        guess: impl FnOnce() -> Result<f64>,
    ) -> Result<Self> {
        let violation_gap = C3_QUANTUM_BOUND - observed_value;
        let certified = violation_gap <= tol;
        let guessing_probability = if certified { guess()? } else { 1.0 };
        Ok(Self {
            guessing_probability,
            min_entropy_bits: min_entropy(guessing_probability)?,
            mode,
            certified,
            observed_value,
            violation_gap,
        })
    }
}

/// `−log₂ g` for `g ∈ (0, 1]`.
pub fn min_entropy(g: f64) -> Result<f64> {
    if !(g > 0.0 && g <= 1.0) {
        return invalid(format!("guessing probability {g} outside (0, 1]"));
    }
    // -log2(1) is -0.0; report +0.
    Ok((-g.log2()).max(0.0))
}

fn extends(outer: &Scenario, inner: &Scenario) -> bool {
    outer.alice_outcomes().starts_with(inner.alice_outcomes())
        && outer.bob_outcomes().starts_with(inner.bob_outcomes())
}

fn align(f: &BellFunctional, b: &Behavior) -> Result<BellFunctional> {
    if b.scenario() == f.scenario() {
        Ok(f.clone())
    } else if extends(b.scenario(), f.scenario()) {
        f.lift(b.scenario())
    } else {
        invalid(format!(
            "behavior scenario does not contain the scenario of {}",
            f.name()
        ))
    }
}

fn same_terms(f: &BellFunctional, g: &BellFunctional) -> bool {
    f.scenario() == g.scenario() && f.coefficients() == g.coefficients()
}

fn require_c3_prime(f: &BellFunctional) -> Result<()> {
    let alpha = -f.coefficient(&C3_PRIME_PENALTY_CELLS[0]);
    match build_c3_prime(alpha) {
        Ok(g) if same_terms(f, &g) => Ok(()),
        _ => invalid(format!("{} is not a C3' instance", f.name())),
    }
}

fn require_c3_double_prime(f: &BellFunctional) -> Result<()> {
    let alpha = -f.coefficient(&C3_PRIME_PENALTY_CELLS[0]);
    let beta = -f.coefficient(&C3_DOUBLE_PRIME_PENALTY_CELLS[0]);
    match build_c3_double_prime(alpha, beta) {
        Ok(g) if same_terms(f, &g) => Ok(()),
        _ => invalid(format!("{} is not a C3'' instance", f.name())),
    }
}

/// Local randomness of Alice's POVM input, certified by maximal C3′ violation.
pub fn certify_local(
    b: &Behavior,
    c3_prime: &BellFunctional,
    tol: f64,
) -> Result<CertifiedRandomness> {
    require_c3_prime(c3_prime)?;
    let value = align(c3_prime, b)?.evaluate(b)?;
    CertifiedRandomness::new(RandomnessMode::Local, value, tol, || {
        Ok(LOCAL_GUESSING_PROBABILITY)
    })
}

/// Global randomness of the POVM pair, certified by maximal C3″ violation.
/// The guessing probability is the largest entry of the POVM joint table.
pub fn certify_global(
    b: &Behavior,
    c3_double_prime: &BellFunctional,
    tol: f64,
) -> Result<CertifiedRandomness> {
    require_c3_double_prime(c3_double_prime)?;
    let value = align(c3_double_prime, b)?.evaluate(b)?;
    let (i, j) = (
        C3_PRIME_PENALTY_CELLS[0].i,
        C3_DOUBLE_PRIME_PENALTY_CELLS[0].j,
    );
    CertifiedRandomness::new(RandomnessMode::Global, value, tol, || {
        Ok(b.joint_table(i, j)?
            .iter()
            .flatten()
            .copied()
            .fold(0.0, f64::max))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::behavior_from_realization;
    use crate::selftest::{reference_realization_global, reference_realization_local};

    #[test]
    fn min_entropy_values() {
        assert!((min_entropy(1.0 / 3.0).unwrap() - 1.584_962_500_721_156).abs() < 1e-12);
        assert_eq!(min_entropy(1.0).unwrap(), 0.0);
        let g = (2.0 + 3f64.sqrt()) / 18.0;
        assert!((min_entropy(g).unwrap() - 2.269_956_374_489).abs() < 1e-9);
        assert!(min_entropy(0.0).is_err());
        assert!(min_entropy(1.5).is_err());
        assert!(min_entropy(f64::NAN).is_err());
    }

    #[test]
    fn local_certification() {
        let b = behavior_from_realization(&reference_realization_local()).unwrap();
        let f = build_c3_prime(1.0).unwrap();
        let c = certify_local(&b, &f, DEFAULT_CERTIFICATION_TOL).unwrap();
        assert!(c.certified);
        assert_eq!(c.guessing_probability, 1.0 / 3.0);
        assert!(c.violation_gap.abs() < 1e-12);

        let u = Behavior::uniform(b.scenario().clone());
        let c = certify_local(&u, &f, DEFAULT_CERTIFICATION_TOL).unwrap();
        assert!(!c.certified);
        assert_eq!(c.guessing_probability, 1.0);
        assert_eq!(c.min_entropy_bits, 0.0);
    }

    #[test]
    fn local_certification_on_global_behavior() {
        let b = behavior_from_realization(&reference_realization_global()).unwrap();
        let c =
            certify_local(&b, &build_c3_prime(2.0).unwrap(), DEFAULT_CERTIFICATION_TOL).unwrap();
        assert!(c.certified);
    }

    #[test]
    fn wrong_functional_rejected() {
        let b = behavior_from_realization(&reference_realization_local()).unwrap();
        assert!(certify_local(&b, &crate::bellcat::build_c3(), 1e-9).is_err());
        let f = build_c3_double_prime(1.0, 1.0).unwrap();
        assert!(certify_global(&b, &f, 1e-9).is_err());
    }

    #[test]
    fn global_certification() {
        let b = behavior_from_realization(&reference_realization_global()).unwrap();
        let f = build_c3_double_prime(1.0, 1.0).unwrap();
        let c = certify_global(&b, &f, DEFAULT_CERTIFICATION_TOL).unwrap();
        assert!(c.certified);
        assert!((c.guessing_probability - (2.0 + 3f64.sqrt()) / 18.0).abs() < 1e-12);
        assert!((c.min_entropy_bits + c.guessing_probability.log2()).abs() < 1e-12);
        assert!((c.min_entropy_bits - 2.269_956).abs() < 1e-5);
    }
}

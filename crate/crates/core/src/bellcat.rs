//! Bell functionals `Σ c_{abij} p(a, b | i, j)`: evaluation, classical bounds
//! by deterministic enumeration, the chained three-input family and its
//! POVM-penalised variants, and the JSON inequality file format.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, parse_json, Error, Result};
use crate::par::Execution;
use crate::qcore::{Behavior, ProbabilityCell, Scenario};

/// Largest joint strategy count `classical_bound` will enumerate.
pub const MAX_STRATEGIES: u128 = 10_000_000;

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Maximal quantum value `3√3` of the chained inequality and its penalised variants.
pub const C3_QUANTUM_BOUND: f64 = 3.0 * SQRT3;

/// Cells penalised by `α` in C3′: Alice's POVM (input 4) against Bob's inputs 1..3.
pub const C3_PRIME_PENALTY_CELLS: [ProbabilityCell; 3] = [
    ProbabilityCell::new(1, 1, 3, 0),
    ProbabilityCell::new(2, -1, 3, 1),
    ProbabilityCell::new(3, 1, 3, 2),
];

/// Cells penalised by `β` in C3″: Alice's inputs 1..3 against Bob's POVM (input 4).
pub const C3_DOUBLE_PRIME_PENALTY_CELLS: [ProbabilityCell; 3] = [
    ProbabilityCell::new(-1, 1, 0, 3),
    ProbabilityCell::new(1, 2, 1, 3),
    ProbabilityCell::new(-1, 3, 2, 3),
];

/// A linear functional on behaviors of a fixed scenario.
///
/// Correlator terms are stored expanded into probability coefficients, so
/// every functional is one sparse coefficient tensor.
#[derive(Clone, Debug)]
pub struct BellFunctional {
    name: String,
    scenario: Scenario,
    coeffs: BTreeMap<ProbabilityCell, f64>,
    quantum_bound: Option<f64>,
    classical_bound_cache: OnceLock<f64>,
}

impl PartialEq for BellFunctional {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.scenario == other.scenario
            && self.coeffs == other.coeffs
            && self.quantum_bound == other.quantum_bound
    }
}

/// A local deterministic strategy attaining the classical bound.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalOptimum {
    pub value: f64,
    /// Outcome index chosen for each Alice input.
    pub alice: Vec<usize>,
    /// Outcome index chosen for each Bob input.
    pub bob: Vec<usize>,
}

impl BellFunctional {
    /// The zero functional on `scenario`.
    pub fn new(name: impl Into<String>, scenario: Scenario) -> Self {
        Self {
            name: name.into(),
            scenario,
            coeffs: BTreeMap::new(),
            quantum_bound: None,
            classical_bound_cache: OnceLock::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn coefficients(&self) -> &BTreeMap<ProbabilityCell, f64> {
        &self.coeffs
    }

    pub fn coefficient(&self, cell: &ProbabilityCell) -> f64 {
        self.coeffs.get(cell).copied().unwrap_or(0.0)
    }

    /// Known maximal quantum value, when one is recorded.
    pub fn quantum_bound(&self) -> Option<f64> {
        self.quantum_bound
    }

    pub fn with_quantum_bound(mut self, value: f64) -> Self {
        self.quantum_bound = Some(value);
        self
    }

    /// Adds `c` to the coefficient of one cell.
    pub fn add_probability(&mut self, cell: ProbabilityCell, c: f64) -> Result<()> {
        self.scenario.index_of(&cell)?;
        if !c.is_finite() {
            return invalid(format!("coefficient for {cell} is not finite"));
        }
        *self.coeffs.entry(cell).or_insert(0.0) += c;
        self.classical_bound_cache = OnceLock::new();
        Ok(())
    }

    /// Adds `c·⟨A_i B_j⟩`, expanded as `Σ c·a·b·p(a, b | i, j)`.
    pub fn add_correlator(&mut self, i: usize, j: usize, c: f64) -> Result<()> {
        if !self.scenario.is_two_outcome(crate::qcore::Party::Alice, i)
            || !self.scenario.is_two_outcome(crate::qcore::Party::Bob, j)
        {
            return invalid(format!(
                "correlator term needs two-outcome inputs (A{}, B{})",
                i + 1,
                j + 1
            ));
        }
        for a in [1, -1] {
            for b in [1, -1] {
                self.add_probability(ProbabilityCell::new(a, b, i, j), c * f64::from(a * b))?;
            }
        }
        Ok(())
    }

    /// The same coefficients viewed on a larger scenario.
    pub fn lift(&self, scenario: &Scenario) -> Result<BellFunctional> {
        let mut out = BellFunctional::new(self.name.clone(), scenario.clone());
        out.quantum_bound = self.quantum_bound;
        for (cell, &c) in &self.coeffs {
            out.add_probability(*cell, c)?;
        }
        Ok(out)
    }

    pub fn evaluate(&self, b: &Behavior) -> Result<f64> {
        if b.scenario() != &self.scenario {
            return invalid(format!(
                "behavior scenario does not match functional {}",
                self.name
            ));
        }
        self.coeffs
            .iter()
            .map(|(cell, c)| Ok(c * b.prob(cell)?))
            .sum()
    }

    /// Maximum over all local deterministic strategies.
    pub fn classical_bound(&self) -> Result<f64> {
        if let Some(&v) = self.classical_bound_cache.get() {
            return Ok(v);
        }
        let v = self.classical_optimum(Execution::default())?.value;
        Ok(*self.classical_bound_cache.get_or_init(|| v))
    }

    /// Exhaustive search over deterministic strategies, returning a witness.
    ///
    /// Alice's strategies are enumerated; for each, Bob's best response is
    /// chosen independently per input, which is exact because the functional
    /// is a sum over Bob's inputs once Alice's outputs are fixed. Ties resolve
    /// to the lowest strategy index, so the result does not depend on `exec`.
    pub fn classical_optimum(&self, exec: Execution) -> Result<ClassicalOptimum> {
        let s = &self.scenario;
        let count = |outs: &[usize]| {
            outs.iter()
                .try_fold(1u128, |acc, &n| acc.checked_mul(n as u128))
        };
        let total = count(s.alice_outcomes())
            .zip(count(s.bob_outcomes()))
            .and_then(|(a, b)| a.checked_mul(b));
        match total {
            Some(t) if t <= MAX_STRATEGIES => {}
            _ => {
                return Err(Error::Capacity(format!(
                    "{} has more than {MAX_STRATEGIES} deterministic strategies",
                    self.name
                )))
            }
        }
        let alice_count = count(s.alice_outcomes()).unwrap() as usize;

        let mut dense = vec![0.0; s.cell_count()];
        for (cell, &c) in &self.coeffs {
            dense[s.index_of(cell)?] = c;
        }

        let decode = |mut idx: usize| -> Vec<usize> {
            s.alice_outcomes()
                .iter()
                .map(|&n| {
                    let o = idx % n;
                    idx /= n;
                    o
                })
                .collect()
        };
        let score = |idx: usize| -> (f64, usize) {
            let alice = decode(idx);
            let mut total = 0.0;
            for (j, &nb) in s.bob_outcomes().iter().enumerate() {
                let best = (0..nb)
                    .map(|bi| {
                        alice
                            .iter()
                            .enumerate()
                            .map(|(i, &ai)| dense[s.flat_index(i, j, ai, bi)])
                            .sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                total += best;
            }
            (total, idx)
        };
        let pick = |x: (f64, usize), y: (f64, usize)| {
            if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) {
                y
            } else {
                x
            }
        };
        let (value, idx) =
            exec.map_reduce(alice_count, (f64::NEG_INFINITY, usize::MAX), score, pick);

        let alice = decode(idx);
        let bob = s
            .bob_outcomes()
            .iter()
            .enumerate()
            .map(|(j, &nb)| {
                let col = |bi: usize| -> f64 {
                    alice
                        .iter()
                        .enumerate()
                        .map(|(i, &ai)| dense[s.flat_index(i, j, ai, bi)])
                        .sum()
                };
                (0..nb).fold(0, |best, bi| if col(bi) > col(best) { bi } else { best })
            })
            .collect();
        Ok(ClassicalOptimum { value, alice, bob })
    }
}

fn chained_scenario(alice_povm: bool, bob_povm: bool) -> Scenario {
    let side = |povm: bool| {
        let mut v = vec![2, 2, 2];
        if povm {
            v.push(3);
        }
        v
    };
    Scenario::new(side(alice_povm), side(bob_povm)).expect("static scenario")
}

fn add_c3_terms(f: &mut BellFunctional) {
    for (i, j, sign) in [
        (0, 0, 1.0),
        (1, 0, 1.0),
        (1, 1, 1.0),
        (2, 1, 1.0),
        (2, 2, 1.0),
        (0, 2, -1.0),
    ] {
        f.add_correlator(i, j, sign)
            .expect("chained terms are in range");
    }
}

/// `⟨A1B1⟩ + ⟨A2B1⟩ + ⟨A2B2⟩ + ⟨A3B2⟩ + ⟨A3B3⟩ − ⟨A1B3⟩`.
pub fn build_c3() -> BellFunctional {
    let mut f = BellFunctional::new("C3", chained_scenario(false, false));
    add_c3_terms(&mut f);
    f.with_quantum_bound(C3_QUANTUM_BOUND)
}

/// C3 minus `α` times the antialignment probabilities of Alice's POVM.
pub fn build_c3_prime(alpha: f64) -> Result<BellFunctional> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return invalid(format!("alpha must be strictly positive, got {alpha}"));
    }
    let mut f = BellFunctional::new("C3'", chained_scenario(true, false));
    add_c3_terms(&mut f);
    for cell in C3_PRIME_PENALTY_CELLS {
        f.add_probability(cell, -alpha)?;
    }
    Ok(f.with_quantum_bound(C3_QUANTUM_BOUND))
}

/// C3′ minus `β` times the antialignment probabilities of Bob's POVM.
pub fn build_c3_double_prime(alpha: f64, beta: f64) -> Result<BellFunctional> {
    if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
        return invalid(format!(
            "alpha and beta must be strictly positive, got {alpha}, {beta}"
        ));
    }
    let mut f = BellFunctional::new("C3''", chained_scenario(true, true));
    add_c3_terms(&mut f);
    for cell in C3_PRIME_PENALTY_CELLS {
        f.add_probability(cell, -alpha)?;
    }
    for cell in C3_DOUBLE_PRIME_PENALTY_CELLS {
        f.add_probability(cell, -beta)?;
    }
    Ok(f.with_quantum_bound(C3_QUANTUM_BOUND))
}

/// `⟨A1B1⟩ + ⟨A1B2⟩ + ⟨A2B1⟩ − ⟨A2B2⟩`.
pub fn build_chsh() -> BellFunctional {
    let mut f = BellFunctional::new("CHSH", Scenario::uniform(2, 2, 2).expect("static scenario"));
    for (i, j, sign) in [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, -1.0)] {
        f.add_correlator(i, j, sign)
            .expect("CHSH terms are in range");
    }
    f.with_quantum_bound(2.0 * std::f64::consts::SQRT_2)
}

/// Resolves a built-in functional by (case-insensitive) name.
pub fn builtin(name: &str, alpha: f64, beta: f64) -> Result<Option<BellFunctional>> {
    Ok(match name.to_ascii_lowercase().as_str() {
        "c3" => Some(build_c3()),
        "c3'" | "c3p" | "c3-prime" => Some(build_c3_prime(alpha)?),
        "c3''" | "c3pp" | "c3-double-prime" => Some(build_c3_double_prime(alpha, beta)?),
        "chsh" => Some(build_chsh()),
        _ => None,
    })
}

/// One coefficient of an inequality file. Inputs are one-based.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDocument {
    pub a: i32,
    pub b: i32,
    pub i: usize,
    pub j: usize,
    pub c: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalDocument {
    pub name: String,
    pub scenario: Scenario,
    pub terms: Vec<TermDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum_bound: Option<f64>,
}

pub fn load_functional(text: &str) -> Result<BellFunctional> {
    let doc: FunctionalDocument = parse_json(text)?;
    let mut f = BellFunctional::new(doc.name, doc.scenario);
    f.quantum_bound = doc.quantum_bound;
    for (k, t) in doc.terms.iter().enumerate() {
        if t.i == 0 || t.j == 0 {
            return invalid(format!("terms[{k}]: inputs are one-based"));
        }
        f.add_probability(ProbabilityCell::new(t.a, t.b, t.i - 1, t.j - 1), t.c)
            .map_err(|e| Error::Validation(format!("terms[{k}]: {e}")))?;
    }
    Ok(f)
}

pub fn save_functional(f: &BellFunctional) -> String {
    let doc = FunctionalDocument {
        name: f.name.clone(),
        scenario: f.scenario.clone(),
        terms: f
            .coeffs
            .iter()
            .map(|(cell, &c)| TermDocument {
                a: cell.a,
                b: cell.b,
                i: cell.i + 1,
                j: cell.j + 1,
                c,
            })
            .collect(),
        quantum_bound: f.quantum_bound,
    };
    serde_json::to_string_pretty(&doc).expect("functional serializes")
}

pub fn load_functional_file(path: impl AsRef<Path>) -> Result<BellFunctional> {
    load_functional(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c3_structure() {
        let f = build_c3();
        assert_eq!(f.coefficients().len(), 24);
        assert_eq!(f.coefficient(&ProbabilityCell::new(1, -1, 0, 2)), 1.0);
        assert_eq!(f.coefficient(&ProbabilityCell::new(1, 1, 0, 2)), -1.0);
        assert_eq!(f.coefficient(&ProbabilityCell::new(1, 1, 0, 1)), 0.0);
    }

    #[test]
    fn c3_on_simple_behaviors() {
        let f = build_c3();
        let s = f.scenario().clone();
        assert_eq!(f.evaluate(&Behavior::uniform(s.clone())).unwrap(), 0.0);
        let all_plus = Behavior::deterministic(s, &[0, 0, 0], &[0, 0, 0]).unwrap();
        assert_eq!(f.evaluate(&all_plus).unwrap(), 4.0);
    }

    #[test]
    fn classical_bounds() {
        assert_eq!(build_c3().classical_bound().unwrap(), 4.0);
        assert_eq!(build_chsh().classical_bound().unwrap(), 2.0);
        for alpha in [0.5, 1.0, 2.0] {
            assert_eq!(
                build_c3_prime(alpha).unwrap().classical_bound().unwrap(),
                4.0
            );
        }
        assert_eq!(
            build_c3_double_prime(1.0, 1.0)
                .unwrap()
                .classical_bound()
                .unwrap(),
            4.0
        );
        let zero = BellFunctional::new("zero", Scenario::uniform(2, 2, 2).unwrap());
        assert_eq!(zero.classical_bound().unwrap(), 0.0);
    }

    #[test]
    fn witness_attains_bound() {
        let f = build_c3_double_prime(1.0, 2.0).unwrap();
        let w = f.classical_optimum(Execution::Sequential).unwrap();
        let d = Behavior::deterministic(f.scenario().clone(), &w.alice, &w.bob).unwrap();
        assert_eq!(f.evaluate(&d).unwrap(), w.value);
        assert_eq!(f.classical_optimum(Execution::Parallel).unwrap(), w);
    }

    #[test]
    fn capacity_limit() {
        let s = Scenario::uniform(12, 12, 2).unwrap();
        let f = BellFunctional::new("big", s);
        assert!(matches!(f.classical_bound(), Err(Error::Capacity(_))));
    }

    #[test]
    fn nonpositive_parameters_rejected() {
        assert!(build_c3_prime(0.0).is_err());
        assert!(build_c3_prime(-1.0).is_err());
        assert!(build_c3_double_prime(1.0, 0.0).is_err());
    }

    #[test]
    fn c3_prime_is_linear_in_penalty_entry() {
        let f = build_c3_prime(2.5).unwrap();
        let s = f.scenario().clone();
        // Only the penalty coefficients touch input 4.
        let penalised: Vec<_> = f.coefficients().keys().filter(|c| c.i == 3).collect();
        assert_eq!(penalised.len(), 3);
        assert_eq!(f.coefficient(&C3_PRIME_PENALTY_CELLS[0]), -2.5);
        assert_eq!(s.alice_outcomes(), &[2, 2, 2, 3]);
    }

    #[test]
    fn chsh_file_round_trip() {
        let text = r#"{
            "name": "CHSH",
            "scenario": {"alice_inputs": 2, "bob_inputs": 2, "alice_outcomes": [2, 2], "bob_outcomes": [2, 2]},
            "terms": [
                {"a": 1, "b": 1, "i": 1, "j": 1, "c": 1}, {"a": 1, "b": -1, "i": 1, "j": 1, "c": -1},
                {"a": -1, "b": 1, "i": 1, "j": 1, "c": -1}, {"a": -1, "b": -1, "i": 1, "j": 1, "c": 1},
                {"a": 1, "b": 1, "i": 1, "j": 2, "c": 1}, {"a": 1, "b": -1, "i": 1, "j": 2, "c": -1},
                {"a": -1, "b": 1, "i": 1, "j": 2, "c": -1}, {"a": -1, "b": -1, "i": 1, "j": 2, "c": 1},
                {"a": 1, "b": 1, "i": 2, "j": 1, "c": 1}, {"a": 1, "b": -1, "i": 2, "j": 1, "c": -1},
                {"a": -1, "b": 1, "i": 2, "j": 1, "c": -1}, {"a": -1, "b": -1, "i": 2, "j": 1, "c": 1},
                {"a": 1, "b": 1, "i": 2, "j": 2, "c": -1}, {"a": 1, "b": -1, "i": 2, "j": 2, "c": 1},
                {"a": -1, "b": 1, "i": 2, "j": 2, "c": 1}, {"a": -1, "b": -1, "i": 2, "j": 2, "c": -1}
            ]
        }"#;
        let f = load_functional(text).unwrap();
        assert_eq!(f.classical_bound().unwrap(), 2.0);
        assert_eq!(f.coefficients(), build_chsh().coefficients());
        assert_eq!(load_functional(&save_functional(&f)).unwrap(), f);
    }

    #[test]
    fn out_of_range_index_rejected() {
        let text = r#"{"name": "bad",
            "scenario": {"alice_inputs": 3, "bob_inputs": 3, "alice_outcomes": [2,2,2], "bob_outcomes": [2,2,2]},
            "terms": [{"a": 1, "b": 1, "i": 5, "j": 1, "c": 1}]}"#;
        assert!(matches!(load_functional(text), Err(Error::Validation(_))));
        let text = r#"{"name": "bad",
            "scenario": {"alice_inputs": 1, "bob_inputs": 1, "alice_outcomes": [2], "bob_outcomes": [2]},
            "terms": [{"a": 2, "b": 1, "i": 1, "j": 1, "c": 1}]}"#;
        assert!(matches!(load_functional(text), Err(Error::Validation(_))));
    }

    #[test]
    fn schema_violation_reports_path() {
        let text = r#"{"name": "bad",
            "scenario": {"alice_inputs": 1, "bob_inputs": 1, "alice_outcomes": [2], "bob_outcomes": [2]},
            "terms": [{"a": 1, "b": 1, "i": 1, "j": 1}]}"#;
        match load_functional(text) {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "terms[0]"),
            other => panic!("expected parse error, got {other:?}"),
        }
        let text = r#"{"name": "bad",
            "scenario": {"alice_inputs": 2, "bob_inputs": 1, "alice_outcomes": [2], "bob_outcomes": [2]},
            "terms": []}"#;
        assert!(load_functional(text).is_err());
    }

    #[test]
    fn builtin_names() {
        assert_eq!(builtin("C3", 1.0, 1.0).unwrap().unwrap().name(), "C3");
        assert_eq!(builtin("c3pp", 1.0, 1.0).unwrap().unwrap().name(), "C3''");
        assert!(builtin("ebi", 1.0, 1.0).unwrap().is_none());
        assert!(builtin("c3p", -1.0, 1.0).is_err());
    }
}

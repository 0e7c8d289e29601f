use std::fmt;

use crate::qcore::Party;

/// A projector `P_{outcome|input}` of one party. `outcome` is an index into
/// the input's outcome list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    pub party: Party,
    pub input: usize,
    pub outcome: usize,
}

impl Symbol {
    pub const fn alice(input: usize, outcome: usize) -> Self {
        Self {
            party: Party::Alice,
            input,
            outcome,
        }
    }

    pub const fn bob(input: usize, outcome: usize) -> Self {
        Self {
            party: Party::Bob,
            input,
            outcome,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}_{}", self.party, self.input + 1, self.outcome)
    }
}

/// A reduced operator word. The empty word is the identity.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Monomial {
    Zero,
    Word(Vec<Symbol>),
}

impl Monomial {
    pub fn identity() -> Self {
        Monomial::Word(Vec::new())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Monomial::Zero)
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Monomial::Word(w) if w.is_empty())
    }

    pub fn symbols(&self) -> &[Symbol] {
        match self {
            Monomial::Zero => &[],
            Monomial::Word(w) => w,
        }
    }

    pub fn len(&self) -> usize {
        self.symbols().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The reduced adjoint (reversed word).
    pub fn adjoint(&self) -> Monomial {
        match self {
            Monomial::Zero => Monomial::Zero,
            Monomial::Word(w) => reduce(&w.iter().rev().copied().collect::<Vec<_>>()),
        }
    }

    /// Representative shared by a word and its adjoint. Real symmetric moment
    /// matrices identify `⟨w⟩` with `⟨w†⟩`.
    pub fn moment_key(&self) -> Monomial {
        let adj = self.adjoint();
        if adj < *self {
            adj
        } else {
            self.clone()
        }
    }

    /// `self† · other`, reduced.
    pub fn sandwich(&self, other: &Monomial) -> Monomial {
        match (self, other) {
            (Monomial::Word(u), Monomial::Word(v)) => {
                let word: Vec<Symbol> = u.iter().rev().chain(v.iter()).copied().collect();
                reduce(&word)
            }
            _ => Monomial::Zero,
        }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Monomial::Zero => f.write_str("0"),
            Monomial::Word(w) if w.is_empty() => f.write_str("1"),
            Monomial::Word(w) => {
                for (k, s) in w.iter().enumerate() {
                    if k > 0 {
                        f.write_str("·")?;
                    }
                    write!(f, "{s}")?;
                }
                Ok(())
            }
        }
    }
}

/// Applies projector algebra to a fixed point: the parties commute (Alice's
/// symbols move before Bob's, keeping each party's order), `PP = P`, and
/// `P_{a|i} P_{a'|i} = 0` for `a ≠ a'`.
pub fn reduce(word: &[Symbol]) -> Monomial {
    let mut w: Vec<Symbol> = word.to_vec();
    loop {
        let mut changed = false;
        let sorted: Vec<Symbol> = w
            .iter()
            .filter(|s| s.party == Party::Alice)
            .chain(w.iter().filter(|s| s.party == Party::Bob))
            .copied()
            .collect();
        if sorted != w {
            changed = true;
        }
        let mut out: Vec<Symbol> = Vec::with_capacity(sorted.len());
        for s in sorted {
            match out.last() {
                Some(last) if *last == s => changed = true,
                Some(last) if last.party == s.party && last.input == s.input => {
                    return Monomial::Zero
                }
                _ => out.push(s),
            }
        }
        w = out;
        if !changed {
            return Monomial::Word(w);
        }
    }
}

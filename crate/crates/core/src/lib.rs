//! Device-independent randomness certification from the three-input chained
//! Bell inequality.
//!
//! The crate is organised bottom-up:
//!
//! * [`qcore`]: qubit and two-qubit linear algebra, measurements, behaviors.
//! * [`bellcat`]: Bell functionals, the chained family and its POVM-penalised
//!   variants, classical bounds by deterministic enumeration, JSON files.
//! * [`selftest`]: the reference realization, antialigned three-outcome POVMs,
//!   extremality certificates and Bloch-coefficient extraction.
//! * [`randomness`]: certified guessing probabilities and min-entropy.
//! * [`npa`]: the second-level moment relaxation, an interior-point SDP
//!   solver, SDPA export and randomness-versus-violation curves.

pub mod bellcat;
pub mod error;
pub mod npa;
pub mod par;
pub mod qcore;
pub mod randomness;
pub mod selftest;

pub use error::{Error, Result};
pub use par::Execution;

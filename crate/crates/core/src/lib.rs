//! Divergence-parameterized randomness extractors and averaging samplers.
//!
//! Extractors are judged against the uniform distribution under a chosen
//! divergence (TV, ℓp, Rényi, KL, subgaussian and subexponential test
//! functions). The crate ships the constructions, their composition
//! combinators with claim bookkeeping, and brute-force oracles that measure
//! the true worst-case error on small domains.

pub mod cli;
pub mod compose;
pub mod divergences;
pub mod domain;
pub mod error;
pub mod expanders;
pub mod hashing;
pub mod samplers;
pub mod verify;

pub use error::{Error, Result};

//! Aubry–Mather machinery for monotone variational recurrence relations:
//! periodic minimizers, Birkhoff combinatorics, gaps of extended orbits,
//! bump perturbations and the destruction pipeline with an exact-arithmetic
//! certificate checker.

pub mod action;
pub mod birkhoff;
pub mod cli;
pub mod error;
pub mod exact;
pub mod io;
pub mod lattice;
pub mod number_theory;
pub mod perturbation;
pub mod pipeline;
pub mod potentials;

pub use error::{Error, Result};

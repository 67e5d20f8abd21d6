//! Decoherence of a harmonic oscillator under stochastic deformations of the
//! canonical commutator, and under fluctuations of the metric.
//!
//! The crate works in a truncated Fock space. Energies are in units of ħω,
//! time in units of 1/ω and quadratures are scaled so the vacuum variance is ½.
//!
//! * [`fock`]: ladder, kinetic and quadrature operators, density matrices, Wigner grids.
//! * [`generators`]: master-equation right-hand sides.
//! * [`integrate`]: fixed-step RK4 evolution with validity checks.
//! * [`trajectories`]: stochastic pure-state unravelling and ensemble averages.
//! * [`analytic`]: closed-form decay laws and matrix elements.
//! * [`estimate`]: curve fitting, rate solving and bound extraction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
#[cfg(test)]
mod cross_checks;
pub mod error;
pub mod estimate;
pub mod fock;
pub mod generators;
pub mod integrate;
pub mod linalg;
pub mod trajectories;

pub use error::{Error, Result};
pub use fock::{DensityMatrix, Operator};
pub use generators::{Generator, KernelSpec, ModelParams};

//! Entanglement-rate numerics: operators, rate functionals, commutator
//! bounds, lattices, local Hamiltonians, dynamics and quasi-adiabatic
//! continuation.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commutator;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod hamiltonian;
pub mod lattice;
pub mod operator;
pub mod qac;
pub mod random;
pub mod rates;

pub use error::{LabError, Result};

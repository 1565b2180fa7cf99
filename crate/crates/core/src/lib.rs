//! Gibbs states of commuting chain Hamiltonians, heat-bath dynamics and
//! numerical certification of modified logarithmic Sobolev inequalities.
//!
//! Natural logarithms are used throughout.

#![no_std]
// `!(x > 0.0)` style guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod certify;
pub mod classical;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod gibbs;
pub mod lattice;
pub mod linalg;
pub mod operator;
pub mod sampling;
pub mod superop;
pub mod tol;

pub use error::{Error, Result};
pub use lattice::{make_chain, standard_splitting, Lattice, Region, Splitting};
pub use operator::{DensityOperator, HermitianOperator, SpectralDecomposition};
pub use tol::Tolerances;

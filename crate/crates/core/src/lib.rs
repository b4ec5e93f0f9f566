//! Numerical laboratory for boundary estimates of singular parabolic p-Laplacian equations.
//!
//! Elliptic and parabolic p-capacities, the capacity density `δ(ρ)`, the
//! Wiener sum and integral, the boundary oscillation iteration and its
//! modulus bound, an implicit Cauchy–Dirichlet solver on rasterised domains,
//! and Harnack-type functionals measured on its output.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
mod energy;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod harnack;
pub mod io;
pub mod lattice;
mod minimize;
pub mod par;
pub mod pde;
pub mod wiener;

pub use error::{Error, Result};

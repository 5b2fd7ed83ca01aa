//! Nonuniform L1 and fractional Crank-Nicolson (Alikhanov) time stepping for
//! one-dimensional linear reaction-subdiffusion problems
//! `D^alpha u - (mu u_x)_x = c u + f` with Dirichlet boundaries.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Stencil loops index several parallel arrays by row.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod analysis;
pub mod error;
pub mod kernels;
pub mod mesh;
pub mod problems;
pub mod solver;
pub mod spatial;
pub mod special;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};

//! Coherent-state path integrals with first-class constraints.
//!
//! Labels, overlaps and symbols live in [`states`] and [`symbols`]; the
//! time-sliced propagator is in [`lattice`], its Wiener-regularized form in
//! [`wiener`], and the constrained routes in [`constraints`]. [`oracle`]
//! holds the exact references the numerical routes are checked against.

pub mod cli;
pub mod constraints;
pub mod error;
pub mod grid;
pub mod lattice;
pub mod oracle;
pub mod states;
pub mod symbols;
pub mod wiener;

pub use error::{Error, Result};

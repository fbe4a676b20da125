//! Steady states of parametrically driven Bose-Hubbard cavity arrays with
//! cascaded, level-dependent decay.
//!
//! Two solver scales share one model: [`dense`] solves the full Liouvillian of
//! small lattices exactly, and [`mpdo`] relaxes a matrix-product density
//! operator of open chains with second-order TEBD. [`observables`] works on
//! either through the [`observables::Expectation`] trait.

pub mod dense;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod model;
pub mod momentum;
pub mod mpdo;
pub mod observables;
pub mod sweep;
pub mod validate;

pub use error::{Error, Result};

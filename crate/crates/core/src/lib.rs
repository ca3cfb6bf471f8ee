//! Finite-dimensional bigraded cochain complexes with a three-component
//! differential, their spectral-sequence pages, rescaled Laplacians over an
//! adiabatic parameter, and the nested Hodge / jet towers that describe the
//! small-eigenvalue branches.
//!
//! Everything is dense, real and deterministic: the same input and the same
//! [`linalg::Tolerances`] always produce the same dimensions, bases and
//! reports.

pub mod adiabatic;
pub mod complex;
pub mod error;
pub mod io;
pub mod linalg;
pub mod models;
pub mod report;
pub mod spectral;
pub mod towers;

// re-exports added as modules land
pub use error::{Error, Result};
pub use linalg::{Subspace, Tolerances};

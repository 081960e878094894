//! Numerical engine for submanifolds of compact symmetric spaces with
//! curvature-adapted focal structure: orbit germs, normal holonomy, the polar
//! slice group, partial tubes and their equifocality checks.

pub mod error;
pub mod fit;
pub mod focal;
pub mod holonomy;
pub mod linalg;
pub mod rng;
pub mod scenario;
pub mod lie;
pub mod models;
pub mod orbits;
pub mod symspace;
pub mod tol;
pub mod torusvar;
pub mod tube;

pub use error::{Error, Result};

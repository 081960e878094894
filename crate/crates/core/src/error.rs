//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("structure constants fail {property}: residual {residual:.3e} exceeds {tolerance:.1e}")]
    NotALieAlgebra {
        property: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("involution check failed ({what}): residual {residual:.3e}")]
    BadInvolution { what: String, residual: f64 },

    #[error("degenerate symmetric pair: {0}")]
    DegeneratePair(String),

    #[error("vector not in {space}: off-component {residual:.3e}")]
    NotInSubspace { space: &'static str, residual: f64 },

    #[error("subspace is not closed under the bracket: residual {0:.3e}")]
    NotASubalgebra(f64),

    #[error("radius {radius:.6e} is not below the germ bound {bound:.6e}")]
    TubeRadius { radius: f64, bound: f64 },

    #[error("curve left the orbit stratum: normal rank changed from {from} to {to}")]
    StratumChange { from: usize, to: usize },

    #[error("accuracy loss: {what} drift {drift:.3e}; retry with step <= {suggested_step:.3e}")]
    Accuracy {
        what: &'static str,
        drift: f64,
        suggested_step: f64,
    },

    #[error("generator is not skew-symmetric: residual {0:.3e}")]
    NotSkew(f64),

    #[error("map is not orthogonal: residual {0:.3e}")]
    NotOrthogonal(f64),

    #[error("decomposition unstable after {attempts} attempts: {detail}")]
    DecompositionUnstable { attempts: usize, detail: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("resolution failure: {0}")]
    Resolution(String),

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("missing dependency: {0}")]
    Dependency(String),

    #[error("point is not principal: orbit dimension {found} below {expected}")]
    NotPrincipal { found: usize, expected: usize },

    #[error("not a lattice basis: {0}")]
    NotLattice(String),

    #[error("curve is not smooth enough: {0}")]
    NotSmooth(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Numerical tolerances used across the engine.

/// Relative singular-value threshold for every rank decision.
pub const RANK_REL: f64 = 1e-8;
/// Absolute floor below which a generator is treated as zero.
pub const ZERO_ABS: f64 = 1e-10;
/// Antisymmetry and Jacobi residual bound for structure constants.
pub const LIE_STRUCT: f64 = 1e-10;
/// Membership test for vectors claimed to lie in a subspace.
pub const MEMBERSHIP: f64 = 1e-8;
/// Skew-symmetry test for generators handed to the closure routine.
pub const SKEW: f64 = 1e-9;
/// Orthogonality test for transported frames.
pub const ORTHOGONAL: f64 = 1e-8;
/// Norm drift bound for numerically transported vectors.
pub const TRANSPORT_DRIFT: f64 = 1e-4;
/// Relative cut for a focal event: `sigma_min <= FOCAL_REL * sigma_max`.
pub const FOCAL_REL: f64 = 1e-8;
/// Hausdorff reconstruction bound.
pub const HAUSDORFF: f64 = 1e-5;
/// Bracket residual for a certified abelian section.
pub const ABELIAN: f64 = 1e-8;
/// Flatness bound for loop transport on a tube normal bundle.
pub const FLAT: f64 = 1e-4;
/// Parallelism bound for normal fields along the tube.
pub const PARALLEL: f64 = 1e-4;
/// Well-definedness of parallel fields and of the tube projection.
pub const WELL_DEFINED: f64 = 1e-6;
/// Agreement of focal radii across a tube.
pub const FOCAL_RADIUS: f64 = 1e-6;

/// A measured value reported together with the bound it is checked against.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct Measured {
    pub value: f64,
    pub tolerance: f64,
}

impl Measured {
    pub fn new(value: f64, tolerance: f64) -> Self {
        Self { value, tolerance }
    }

    pub fn pass(&self) -> bool {
        self.value <= self.tolerance
    }
}

//! Homogeneous submanifold germs `M = H.x` in an ambient space.
//!
//! Two ambients are supported: the symmetric space `N` itself, and the
//! Euclidean space `p` carrying the isotropy representation (s-representation
//! orbits). In both cases the germ is computed from Killing fields of the
//! subalgebra `h`.

mod germ;
mod transport;

pub use germ::{
    fixed_algebra_of, hermann_orbit_germ, homogeneous_orbit_germ, srep_orbit_germ, OrbitGerm,
    ShapeCertificate,
};
pub use transport::{
    commutator_loop, holonomy_tube_sample, loop_holonomy, normal_parallel_transport,
    segment_map, CurveSampler, OrbitCurve, Segment, TransportMethod, TransportedFrame,
};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::symspace::{SymPoint, SymmetricSpace};
use crate::tol;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AmbientKind {
    /// Orbits in `p` under the isotropy representation.
    Euclidean,
    /// Orbits in the symmetric space.
    Symmetric,
}

#[derive(Clone, Debug)]
pub enum Point {
    Euclidean(DVector<f64>),
    Symmetric(SymPoint),
}

/// The action of a subgroup `H` (through its Lie algebra) on an ambient.
#[derive(Debug)]
pub struct OrbitFamily {
    pub space: Arc<SymmetricSpace>,
    pub kind: AmbientKind,
    /// Orthonormal basis of `h` in adapted coordinates.
    pub h: DMatrix<f64>,
}

impl OrbitFamily {
    pub fn new(space: Arc<SymmetricSpace>, kind: AmbientKind, h: &DMatrix<f64>) -> Result<Self> {
        let n = space.dim_g();
        if h.nrows() != n {
            return Err(Error::Invalid(format!("subalgebra vectors must have length {n}")));
        }
        let h = linalg::orthonormal_span(h);
        // Subalgebra test in adapted coordinates.
        let p = linalg::projector(&h);
        let eye = DMatrix::<f64>::identity(n, n);
        let mut worst: f64 = 0.0;
        for a in 0..h.ncols() {
            for b in a + 1..h.ncols() {
                let br = space.bracket(&h.column(a).into_owned(), &h.column(b).into_owned());
                worst = worst.max(((&eye - &p) * br).norm());
            }
        }
        if worst > 1e-9 {
            return Err(Error::NotASubalgebra(worst));
        }
        if kind == AmbientKind::Euclidean {
            let r = h.rows(0, space.dim_k()).norm_squared();
            if (r - h.ncols() as f64).abs() > 1e-9 {
                return Err(Error::NotInSubspace { space: "k", residual: (h.ncols() as f64 - r).abs() });
            }
        }
        Ok(Self { space, kind, h })
    }

    pub fn dim_h(&self) -> usize {
        self.h.ncols()
    }

    pub fn dim_g(&self) -> usize {
        self.space.dim_g()
    }

    /// Dimension of the ambient space.
    pub fn ambient_dim(&self) -> usize {
        self.space.dim_p()
    }

    fn sym<'a>(&self, x: &'a Point) -> &'a SymPoint {
        match x {
            Point::Symmetric(q) => q,
            Point::Euclidean(_) => panic!("euclidean point given to a symmetric family"),
        }
    }

    fn vec<'a>(&self, x: &'a Point) -> &'a DVector<f64> {
        match x {
            Point::Euclidean(v) => v,
            Point::Symmetric(_) => panic!("symmetric point given to a euclidean family"),
        }
    }

    /// Killing field of `z` in `g` evaluated at `x`.
    pub fn killing(&self, z: &DVector<f64>, x: &Point) -> DVector<f64> {
        match self.kind {
            AmbientKind::Euclidean => self.space.bracket(z, self.vec(x)),
            AmbientKind::Symmetric => {
                let q = self.sym(x);
                (z - &q.theta * z) * 0.5
            }
        }
    }

    /// Killing fields of the basis of `h` at `x`, as columns.
    pub fn killing_matrix(&self, x: &Point) -> DMatrix<f64> {
        let cols: Vec<_> = (0..self.dim_h()).map(|i| self.killing(&self.h.column(i).into_owned(), x)).collect();
        linalg::columns(self.dim_g(), &cols)
    }

    /// `T_x` of the ambient as orthonormal columns.
    pub fn ambient_basis(&self, x: &Point) -> DMatrix<f64> {
        match self.kind {
            AmbientKind::Euclidean => self.space.p_basis(),
            AmbientKind::Symmetric => self.space.tangent_basis(self.sym(x)),
        }
    }

    /// Orthonormal normal basis of the orbit through `x`.
    pub fn normal_basis(&self, x: &Point) -> DMatrix<f64> {
        let t = linalg::orthonormal_span(&self.killing_matrix(x));
        linalg::complement_in(&t, &self.ambient_basis(x))
    }

    pub fn normal_projector(&self, x: &Point) -> DMatrix<f64> {
        linalg::projector(&self.normal_basis(x))
    }

    /// Orbit dimension at `x`.
    pub fn orbit_dim(&self, x: &Point) -> usize {
        linalg::rank(&self.killing_matrix(x))
    }

    /// Derivative at `x` of the Killing field of `wb` along the Killing field of `wa`.
    pub fn killing_derivative(&self, x: &Point, wa: &DVector<f64>, wb: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            AmbientKind::Euclidean => {
                let ad_a = self.space.ad(wa);
                self.space.ad(wb) * (ad_a * self.vec(x))
            }
            AmbientKind::Symmetric => {
                let q = self.sym(x);
                let ad_a = self.space.ad(wa);
                -(&ad_a * (&q.theta * wb) - &q.theta * (&ad_a * wb)) * 0.5
            }
        }
    }

    /// `h . x` for `h` given by its adjoint matrix.
    pub fn act(&self, h: &DMatrix<f64>, x: &Point) -> Point {
        match x {
            Point::Euclidean(v) => Point::Euclidean(h * v),
            Point::Symmetric(q) => Point::Symmetric(self.space.act(h, q)),
        }
    }

    /// Ambient geodesic from `x` with initial velocity `v`.
    pub fn exp_at(&self, x: &Point, v: &DVector<f64>) -> Point {
        match x {
            Point::Euclidean(z) => Point::Euclidean(z + v),
            Point::Symmetric(q) => Point::Symmetric(self.space.exp_at(q, v)),
        }
    }

    /// Parallel transport along the ambient geodesic with velocity `v`.
    pub fn geodesic_transport(&self, v: &DVector<f64>) -> DMatrix<f64> {
        match self.kind {
            AmbientKind::Euclidean => DMatrix::identity(self.dim_g(), self.dim_g()),
            AmbientKind::Symmetric => self.space.exp_ad(v),
        }
    }

    /// Ambient curvature `R(u, v) w`.
    pub fn curvature(&self, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            AmbientKind::Euclidean => DVector::zeros(self.dim_g()),
            AmbientKind::Symmetric => self.space.curvature_unchecked(u, v, w),
        }
    }

    /// Matrix of `z -> R(z, eta) eta` on the orthonormal columns `basis`.
    pub fn jacobi_matrix(&self, basis: &DMatrix<f64>, eta: &DVector<f64>) -> DMatrix<f64> {
        match self.kind {
            AmbientKind::Euclidean => DMatrix::zeros(basis.ncols(), basis.ncols()),
            AmbientKind::Symmetric => self.space.jacobi_matrix(basis, eta),
        }
    }

    /// Embedding used for distances: the vector itself, or `theta_q` flattened.
    pub fn embed(&self, x: &Point) -> DVector<f64> {
        match x {
            Point::Euclidean(v) => v.clone(),
            Point::Symmetric(q) => linalg::flatten(&q.theta),
        }
    }

    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        (self.embed(a) - self.embed(b)).norm()
    }

    /// Ambient-metric distance estimate, exact to first order for nearby
    /// points.
    pub fn metric_distance(&self, a: &Point, b: &Point) -> f64 {
        match (a, b) {
            (Point::Symmetric(p), Point::Symmetric(q)) => self.space.local_distance(p, q),
            _ => (self.vec(a) - self.vec(b)).norm(),
        }
    }

    /// Converts an embedding residual into a metric distance estimate.
    pub fn embed_to_metric(&self, d: f64) -> f64 {
        match self.kind {
            AmbientKind::Euclidean => d,
            AmbientKind::Symmetric => d * self.space.scale().sqrt() * 0.5,
        }
    }

    /// Velocity in `T_x` of a curve through `x` whose embedding moves by
    /// `d_embed`.
    pub fn velocity(&self, x: &Point, d_embed: &DVector<f64>) -> DVector<f64> {
        match x {
            Point::Euclidean(_) => d_embed.clone(),
            Point::Symmetric(q) => {
                let n = self.dim_g();
                let dtheta = DMatrix::from_column_slice(n, n, d_embed.as_slice());
                self.space.velocity_from_theta(q, &dtheta)
            }
        }
    }

    /// Check that `v` is tangent to the ambient at `x`.
    pub fn check_tangent(&self, x: &Point, v: &DVector<f64>) -> Result<()> {
        let b = self.ambient_basis(x);
        let r = (v - &b * (b.transpose() * v)).norm();
        if r > tol::MEMBERSHIP * v.norm().max(1.0) {
            return Err(Error::NotInSubspace { space: "the ambient tangent space", residual: r });
        }
        Ok(())
    }

    /// Check that `z` lies in `h`.
    pub fn check_in_h(&self, z: &DVector<f64>) -> Result<()> {
        let r = (z - &self.h * (self.h.transpose() * z)).norm();
        if r > tol::MEMBERSHIP * z.norm().max(1.0) {
            return Err(Error::NotInSubspace { space: "h", residual: r });
        }
        Ok(())
    }
}

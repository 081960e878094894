//! Compact symmetric space `N = G/K` modelled inside `g`.
//!
//! Coordinates are taken in a basis of `g` that is orthonormal for
//! `-scale * B` and adapted to `g = k + p`: the first `dim k` coordinates span
//! `k`. In these coordinates every `ad` matrix is skew and the involution at
//! the base point is `diag(1, .., 1, -1, .., -1)`.
//!
//! A point `q = g.p` is stored through the frame `Ad(g)`; its involution is
//! `theta_q = Ad(g) theta Ad(g)^T` and `T_q N` is the `-1` eigenspace of
//! `theta_q`. Curvature at every point is `R(x, y) z = -[[x, y], z]`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::{CartanDecomposition, LieAlgebra};
use crate::linalg;
use crate::tol;

#[derive(Clone, Debug)]
pub struct SymmetricSpace {
    name: String,
    scale: f64,
    nk: usize,
    np: usize,
    /// Columns are the adapted basis written in the original algebra basis.
    change: DMatrix<f64>,
    change_inv: DMatrix<f64>,
    ad: Vec<DMatrix<f64>>,
    theta0: DMatrix<f64>,
    cartan: CartanDecomposition,
}

/// A point of `N`, stored through the frame `Ad(g)` with `q = g.p`.
#[derive(Clone, Debug)]
pub struct SymPoint {
    pub frame: DMatrix<f64>,
    pub theta: DMatrix<f64>,
}

/// Eigen-decomposition of the Jacobi operator `z -> R(z, eta) eta` on `T_q N`.
#[derive(Clone, Debug)]
pub struct JacobiSpectrum {
    /// Eigenvalues, ascending.
    pub values: Vec<f64>,
    /// Matching unit eigenvectors as columns in `g` coordinates.
    pub vectors: DMatrix<f64>,
}

/// One eigenvalue cluster of a Jacobi spectrum.
#[derive(Clone, Debug, Serialize)]
pub struct Eigenspace {
    pub value: f64,
    pub dim: usize,
}

impl JacobiSpectrum {
    /// Eigenvalues merged within `rel * max|lambda|`.
    pub fn eigenspaces(&self, rel: f64) -> Vec<Eigenspace> {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut out: Vec<Eigenspace> = Vec::new();
        for &v in &self.values {
            match out.last_mut() {
                Some(last) if (v - last.value).abs() <= rel * scale => {
                    last.value = (last.value * last.dim as f64 + v) / (last.dim as f64 + 1.0);
                    last.dim += 1;
                }
                _ => out.push(Eigenspace { value: v, dim: 1 }),
            }
        }
        out
    }
}

/// Flat subspace (abelian subspace of some `p_q`) given by orthonormal columns.
#[derive(Clone, Debug)]
pub struct FlatSubspace {
    pub basis: DMatrix<f64>,
}

impl FlatSubspace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

impl SymmetricSpace {
    pub fn new(cartan: CartanDecomposition, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Invalid("metric scale must be positive".into()));
        }
        let alg = &cartan.algebra;
        let n = alg.dim();
        let nk = cartan.dim_k();
        let np = cartan.dim_p();
        let mut change = DMatrix::zeros(n, n);
        change.view_mut((0, 0), (n, nk)).copy_from(&cartan.k_basis);
        change.view_mut((0, nk), (n, np)).copy_from(&cartan.p_basis);
        change /= scale.sqrt();
        let change_inv = change
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::DegeneratePair("adapted basis is singular".into()))?;
        let ad = (0..n)
            .map(|a| &change_inv * alg.ad(&change.column(a).into_owned()) * &change)
            .collect();
        let theta0 = DMatrix::from_fn(n, n, |i, j| match (i == j, i < nk) {
            (true, true) => 1.0,
            (true, false) => -1.0,
            _ => 0.0,
        });
        Ok(Self {
            name: format!("{}/{}", alg.name(), "k"),
            scale,
            nk,
            np,
            change,
            change_inv,
            ad,
            theta0,
            cartan,
        })
    }

    /// Convenience constructor from an algebra and its involution matrix.
    pub fn from_pair(algebra: LieAlgebra, theta: DMatrix<f64>, scale: f64) -> Result<Self> {
        Self::new(CartanDecomposition::new(algebra, theta)?, scale)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn cartan(&self) -> &CartanDecomposition {
        &self.cartan
    }

    pub fn algebra(&self) -> &LieAlgebra {
        &self.cartan.algebra
    }

    pub fn dim_g(&self) -> usize {
        self.nk + self.np
    }

    pub fn dim_k(&self) -> usize {
        self.nk
    }

    /// Dimension of `N`.
    pub fn dim_p(&self) -> usize {
        self.np
    }

    /// Original algebra coordinates to adapted coordinates.
    pub fn to_adapted(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.change_inv * x
    }

    pub fn from_adapted(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.change * x
    }

    /// Map a matrix acting on original coordinates to adapted coordinates.
    pub fn operator_to_adapted(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.change_inv * m * &self.change
    }

    pub fn ad_basis(&self, a: usize) -> &DMatrix<f64> {
        &self.ad[a]
    }

    pub fn ad(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim_g();
        let mut m = DMatrix::zeros(n, n);
        for (a, ad) in self.ad.iter().enumerate() {
            if x[a] != 0.0 {
                m += ad * x[a];
            }
        }
        m
    }

    pub fn bracket(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        self.ad(x) * y
    }

    /// `Ad(exp x)` for `x` in `g`.
    pub fn exp_ad(&self, x: &DVector<f64>) -> DMatrix<f64> {
        linalg::expm(&self.ad(x))
    }

    pub fn theta0(&self) -> &DMatrix<f64> {
        &self.theta0
    }

    pub fn k_unit(&self, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim_g());
        v[i] = 1.0;
        v
    }

    pub fn p_unit(&self, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim_g());
        v[self.nk + i] = 1.0;
        v
    }

    /// `k` as orthonormal columns.
    pub fn k_basis(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim_g(), self.dim_g()).columns(0, self.nk).into_owned()
    }

    /// `p = T_p N` as orthonormal columns.
    pub fn p_basis(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim_g(), self.dim_g()).columns(self.nk, self.np).into_owned()
    }

    /// Norm of the `k` component of `x`.
    pub fn k_component_norm(&self, x: &DVector<f64>) -> f64 {
        x.rows(0, self.nk).norm()
    }

    fn check_in_p(&self, x: &DVector<f64>) -> Result<()> {
        let r = self.k_component_norm(x);
        if r > tol::MEMBERSHIP * x.norm().max(1.0) {
            return Err(Error::NotInSubspace { space: "p", residual: r });
        }
        Ok(())
    }

    /// `R(x, y) z = -[[x, y], z]` for `x, y, z` in `p`.
    pub fn curvature(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_in_p(x)?;
        self.check_in_p(y)?;
        self.check_in_p(z)?;
        Ok(self.curvature_unchecked(x, y, z))
    }

    /// Curvature formula without membership checks; valid at any point for
    /// vectors of the corresponding `p_q`.
    pub fn curvature_unchecked(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        -self.bracket(&self.bracket(x, y), z)
    }

    pub fn base_point(&self) -> SymPoint {
        let n = self.dim_g();
        SymPoint { frame: DMatrix::identity(n, n), theta: self.theta0.clone() }
    }

    pub fn point_from_frame(&self, frame: DMatrix<f64>) -> SymPoint {
        let theta = &frame * &self.theta0 * frame.transpose();
        SymPoint { frame, theta }
    }

    /// `h . q` for `h` given by its adjoint matrix.
    pub fn act(&self, h: &DMatrix<f64>, q: &SymPoint) -> SymPoint {
        self.point_from_frame(h * &q.frame)
    }

    /// Geodesic `exp_q(v)` for `v` in `p_q`.
    pub fn exp_at(&self, q: &SymPoint, v: &DVector<f64>) -> SymPoint {
        self.act(&self.exp_ad(v), q)
    }

    /// `T_q N` as orthonormal columns.
    pub fn tangent_basis(&self, q: &SymPoint) -> DMatrix<f64> {
        q.frame.columns(self.nk, self.np).into_owned()
    }

    /// Orthogonal projector onto `p_q`.
    pub fn tangent_projector(&self, q: &SymPoint) -> DMatrix<f64> {
        let n = self.dim_g();
        (DMatrix::identity(n, n) - &q.theta) * 0.5
    }

    /// Chordal distance between points in the `theta` embedding.
    pub fn chordal_distance(&self, a: &SymPoint, b: &SymPoint) -> f64 {
        (&a.theta - &b.theta).norm()
    }

    /// Geodesic distance estimate between nearby points.
    ///
    /// A displacement `v` in `p_q` moves `theta_q` by `[ad v, theta_q]`, whose
    /// norm is `2 |v| / sqrt(scale)`; the estimate is exact to first order.
    pub fn local_distance(&self, a: &SymPoint, b: &SymPoint) -> f64 {
        self.chordal_distance(a, b) * self.scale.sqrt() * 0.5
    }

    /// The tangent vector `v` in `p_q` with `[ad v, theta_q] = dtheta`, in the
    /// least-squares sense.
    pub fn velocity_from_theta(&self, q: &SymPoint, dtheta: &DMatrix<f64>) -> DVector<f64> {
        let b = self.tangent_basis(q);
        let n = self.dim_g();
        let mut m = DMatrix::zeros(n * n, b.ncols());
        for i in 0..b.ncols() {
            let ad = self.ad(&b.column(i).into_owned());
            let c = &ad * &q.theta - &q.theta * &ad;
            m.set_column(i, &linalg::flatten(&c));
        }
        &b * linalg::lstsq(&m, &linalg::flatten(dtheta))
    }

    /// Matrix of `z -> R(z, eta) eta` on the span of orthonormal columns `basis`.
    pub fn jacobi_matrix(&self, basis: &DMatrix<f64>, eta: &DVector<f64>) -> DMatrix<f64> {
        let m = basis.ncols();
        let ad_eta = self.ad(eta);
        let images: Vec<DVector<f64>> = (0..m)
            .map(|j| {
                let z = basis.column(j).into_owned();
                // R(z, eta) eta = -[[z, eta], eta] = -ad_eta^2 z
                -(&ad_eta * (&ad_eta * z))
            })
            .collect();
        let mut j = basis.transpose() * linalg::columns(self.dim_g(), &images);
        j = (&j + j.transpose()) * 0.5;
        j
    }

    /// Jacobi spectrum at the base point, `eta` in `p`.
    pub fn jacobi_spectrum(&self, eta: &DVector<f64>) -> Result<JacobiSpectrum> {
        self.check_in_p(eta)?;
        Ok(self.jacobi_spectrum_on(&self.p_basis(), eta))
    }

    /// Jacobi spectrum on the tangent space spanned by `basis`.
    pub fn jacobi_spectrum_on(&self, basis: &DMatrix<f64>, eta: &DVector<f64>) -> JacobiSpectrum {
        let (values, vecs) = linalg::sym_eigen(&self.jacobi_matrix(basis, eta));
        JacobiSpectrum { values, vectors: basis * vecs }
    }

    /// A maximal abelian subspace of `p_q` containing `eta`.
    pub fn maximal_abelian_through(&self, q: &SymPoint, eta: &DVector<f64>) -> Result<FlatSubspace> {
        let eta0 = q.frame.transpose() * eta;
        self.check_in_p(&eta0)?;
        if eta0.norm() <= tol::ZERO_ABS {
            return Err(Error::Invalid("maximal abelian subspace needs a nonzero vector".into()));
        }
        let pb = self.p_basis();
        let mut a: Vec<DVector<f64>> = vec![&eta0 / eta0.norm()];
        loop {
            let n = self.dim_g();
            let mut stacked = DMatrix::zeros(n * a.len(), self.np);
            for (i, x) in a.iter().enumerate() {
                stacked.view_mut((i * n, 0), (n, self.np)).copy_from(&(self.ad(x) * &pb));
            }
            let cent = &pb * linalg::null_space(&stacked);
            if cent.ncols() <= a.len() {
                break;
            }
            let cur = linalg::orthonormal_span(&linalg::columns(n, &a));
            let extra = linalg::complement_in(&cur, &cent);
            // A fixed irrational combination avoids landing on a wall.
            let mut z = DVector::zeros(n);
            for j in 0..extra.ncols() {
                z += extra.column(j) * (1.0 + 0.7548776662466927 * (j as f64 + 1.0)).fract().max(0.1);
            }
            a.push(&z / z.norm());
        }
        let basis = linalg::orthonormal_span(&linalg::columns(self.dim_g(), &a));
        Ok(FlatSubspace { basis: &q.frame * basis })
    }

    /// Rank of the symmetric space.
    pub fn rank(&self) -> usize {
        let mut eta = DVector::zeros(self.dim_g());
        for i in 0..self.np {
            eta[self.nk + i] = (0.5 + 0.618034 * (i as f64 + 1.0)).fract() + 0.1;
        }
        self.maximal_abelian_through(&self.base_point(), &eta).map(|f| f.dim()).unwrap_or(0)
    }

    /// Parallel transport of `w` along `t -> exp(t d)` inside the flat `a`.
    pub fn transport_along_flat(
        &self,
        flat: &FlatSubspace,
        w: &DVector<f64>,
        d: &DVector<f64>,
        t: f64,
    ) -> Result<DVector<f64>> {
        let r = (d - &flat.basis * (flat.basis.transpose() * d)).norm();
        if r > tol::MEMBERSHIP * d.norm().max(1.0) {
            return Err(Error::NotInSubspace { space: "the flat", residual: r });
        }
        Ok(self.exp_ad(&(d * t)) * w)
    }
}

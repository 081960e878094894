use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tol;

/// A Lie subalgebra of `so(k)` stored as a basis orthonormal for
/// `<A, B> = tr(A^T B) / 2`. Each elementary rotation `E_ij - E_ji` is a unit
/// vector under this form.
#[derive(Clone, Debug)]
pub struct MatrixLieAlgebra {
    pub space_dim: usize,
    pub basis: Vec<DMatrix<f64>>,
}

pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b) * 0.5
}

impl MatrixLieAlgebra {
    pub fn trivial(space_dim: usize) -> Self {
        Self { space_dim, basis: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Component of `x` orthogonal to the algebra.
    pub fn residual(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut r = x.clone();
        for _ in 0..2 {
            for b in &self.basis {
                r -= b * inner(&r, b);
            }
        }
        r
    }

    pub fn contains(&self, x: &DMatrix<f64>, rel: f64) -> bool {
        self.residual(x).norm() <= rel * x.norm().max(tol::ZERO_ABS)
    }

    /// Try to extend the basis by `x`; returns whether it grew.
    fn push(&mut self, x: &DMatrix<f64>, scale: f64) -> bool {
        let nx = x.norm();
        if nx <= tol::ZERO_ABS.max(tol::RANK_REL * scale) {
            return false;
        }
        let r = self.residual(x);
        let nr = r.norm();
        if nr <= tol::RANK_REL * nx.max(scale) {
            return false;
        }
        let unit = &r / (inner(&r, &r).sqrt());
        self.basis.push(unit);
        true
    }

    /// Conjugate every basis element by an orthogonal `k x k` matrix.
    pub fn conjugated(&self, g: &DMatrix<f64>) -> Self {
        Self {
            space_dim: self.space_dim,
            basis: self.basis.iter().map(|x| g * x * g.transpose()).collect(),
        }
    }

    /// Largest principal angle between two algebras in the same `so(k)`.
    pub fn distance(&self, other: &Self) -> f64 {
        let a = self.stacked();
        let b = other.stacked();
        crate::linalg::subspace_distance(&a, &b)
    }

    /// Basis as unit columns of `R^{k*k}` (Frobenius-normalized).
    pub fn stacked(&self) -> DMatrix<f64> {
        let k = self.space_dim;
        let mut m = DMatrix::zeros(k * k, self.basis.len());
        for (j, b) in self.basis.iter().enumerate() {
            let f = crate::linalg::flatten(b);
            m.set_column(j, &(&f / f.norm()));
        }
        m
    }

    /// Generic element: a fixed combination with distinct coefficients.
    pub fn generic_element(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.space_dim, self.space_dim);
        for (i, b) in self.basis.iter().enumerate() {
            x += b * (1.0 + 0.6180339887498949 * (i as f64 + 1.0)).fract().max(0.05);
        }
        x
    }
}

/// Smallest Lie subalgebra of `so(k)` containing the generators.
///
/// Generators must be `k x k` and skew-symmetric. Generators whose norm is
/// numerically zero are ignored.
pub fn lie_closure(space_dim: usize, generators: &[DMatrix<f64>]) -> Result<MatrixLieAlgebra> {
    extend_closure(MatrixLieAlgebra::trivial(space_dim), generators)
}

/// Closure of an existing algebra together with more generators.
pub fn extend_closure(mut alg: MatrixLieAlgebra, generators: &[DMatrix<f64>]) -> Result<MatrixLieAlgebra> {
    let k = alg.space_dim;
    let mut scale: f64 = 0.0;
    for g in generators {
        if g.shape() != (k, k) {
            return Err(Error::Invalid(format!("generator is not {k}x{k}")));
        }
        let s = crate::linalg::skew_residual(g);
        if s > tol::SKEW * g.norm().max(1.0) {
            return Err(Error::NotSkew(s));
        }
        scale = scale.max(g.norm());
    }
    for b in &alg.basis {
        scale = scale.max(b.norm());
    }
    let mut frontier = 0;
    let before = alg.dim();
    for g in generators {
        alg.push(&crate::linalg::skew_part(g), scale);
    }
    if alg.dim() == before && before > 0 {
        return Ok(alg);
    }
    // Bracket every new element with every element until nothing new appears.
    let max_dim = k * (k.saturating_sub(1)) / 2;
    while frontier < alg.dim() && alg.dim() < max_dim {
        let x = alg.basis[frontier].clone();
        let mut j = 0;
        while j < alg.dim() && alg.dim() < max_dim {
            let c = crate::linalg::commutator(&x, &alg.basis[j]);
            alg.push(&c, 1.0);
            j += 1;
        }
        frontier += 1;
    }
    Ok(alg)
}

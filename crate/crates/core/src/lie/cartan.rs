use nalgebra::DMatrix;
use serde::Serialize;

use super::algebra::LieAlgebra;
use crate::error::{Error, Result};
use crate::linalg;

/// Residuals measured while validating a Cartan decomposition.
#[derive(Clone, Debug, Serialize)]
pub struct CartanResiduals {
    pub involution_square: f64,
    pub automorphism: f64,
    pub k_k_in_k: f64,
    pub k_p_in_p: f64,
    pub p_p_in_k: f64,
    pub k_perp_p: f64,
}

/// `g = k + p` for an involutive automorphism of a compact algebra.
///
/// `k_basis` and `p_basis` hold coordinate columns that are orthonormal for
/// the inner product `-B`.
#[derive(Clone, Debug)]
pub struct CartanDecomposition {
    pub algebra: LieAlgebra,
    pub theta: DMatrix<f64>,
    pub k_basis: DMatrix<f64>,
    pub p_basis: DMatrix<f64>,
    pub residuals: CartanResiduals,
}

const INVOLUTION_TOL: f64 = 1e-10;

impl CartanDecomposition {
    pub fn new(algebra: LieAlgebra, theta: DMatrix<f64>) -> Result<Self> {
        let n = algebra.dim();
        if theta.shape() != (n, n) {
            return Err(Error::Invalid(format!("involution must be {n}x{n}")));
        }
        if !algebra.is_compact_semisimple() {
            return Err(Error::Invalid(format!(
                "{} is not compact semisimple (Killing form not negative definite)",
                algebra.name()
            )));
        }
        let eye = DMatrix::<f64>::identity(n, n);
        let sq = (&theta * &theta - &eye).norm();
        if sq > INVOLUTION_TOL {
            return Err(Error::BadInvolution { what: "theta^2 != id".into(), residual: sq });
        }
        let mut auto: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let ei = eye.column(i).into_owned();
                let ej = eye.column(j).into_owned();
                let lhs = &theta * algebra.bracket(&ei, &ej);
                let rhs = algebra.bracket(&(&theta * &ei), &(&theta * &ej));
                auto = auto.max((lhs - rhs).norm());
            }
        }
        if auto > INVOLUTION_TOL {
            return Err(Error::BadInvolution {
                what: "theta does not preserve the bracket".into(),
                residual: auto,
            });
        }
        let g = -algebra.killing();
        let k_raw = linalg::null_space(&(&theta - &eye));
        let p_raw = linalg::null_space(&(&theta + &eye));
        if p_raw.ncols() == 0 {
            return Err(Error::DegeneratePair("the -1 eigenspace p is zero".into()));
        }
        if k_raw.ncols() + p_raw.ncols() != n {
            return Err(Error::BadInvolution {
                what: "eigenspaces of theta do not span the algebra".into(),
                residual: (n - k_raw.ncols() - p_raw.ncols()) as f64,
            });
        }
        let k_basis = orthonormalize(&k_raw, &g);
        let p_basis = orthonormalize(&p_raw, &g);

        let comp = |v: &nalgebra::DVector<f64>, sign: f64| ((&theta * v) * sign - v).norm() * 0.5;
        let mut kk: f64 = 0.0;
        let mut kp: f64 = 0.0;
        let mut pp: f64 = 0.0;
        for a in 0..k_basis.ncols() {
            let x = k_basis.column(a).into_owned();
            for b in 0..k_basis.ncols() {
                kk = kk.max(comp(&algebra.bracket(&x, &k_basis.column(b).into_owned()), 1.0));
            }
            for b in 0..p_basis.ncols() {
                kp = kp.max(comp(&algebra.bracket(&x, &p_basis.column(b).into_owned()), -1.0));
            }
        }
        for a in 0..p_basis.ncols() {
            let x = p_basis.column(a).into_owned();
            for b in 0..p_basis.ncols() {
                pp = pp.max(comp(&algebra.bracket(&x, &p_basis.column(b).into_owned()), 1.0));
            }
        }
        let perp = (k_basis.transpose() * &g * &p_basis).amax();
        let residuals = CartanResiduals {
            involution_square: sq,
            automorphism: auto,
            k_k_in_k: kk,
            k_p_in_p: kp,
            p_p_in_k: pp,
            k_perp_p: perp,
        };
        Ok(Self { algebra, theta, k_basis, p_basis, residuals })
    }

    pub fn dim_k(&self) -> usize {
        self.k_basis.ncols()
    }

    pub fn dim_p(&self) -> usize {
        self.p_basis.ncols()
    }
}

/// Columns orthonormal for the positive definite form `g`.
pub(crate) fn orthonormalize(v: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    if v.ncols() == 0 {
        return v.clone();
    }
    let gram = v.transpose() * g * v;
    let (vals, vecs) = linalg::sym_eigen(&gram);
    let inv_sqrt = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| 1.0 / l.sqrt()),
    ));
    v * (&vecs * inv_sqrt * vecs.transpose())
}

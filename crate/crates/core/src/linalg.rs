//! Dense linear-algebra helpers on top of nalgebra.
//!
//! Rank decisions use singular values against `tol::RANK_REL` times the
//! largest singular value, with `tol::ZERO_ABS` as an absolute floor.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tol;

/// Singular value decomposition with values sorted in decreasing order.
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

/// Full SVD with values sorted in decreasing order, computed by faer.
///
/// `u` is `r x r`, `v` is `c x c` and `s` is padded with zeros to length `c`.
/// nalgebra's own SVD is avoided: on rank-deficient inputs with clustered
/// singular values it can return factors that do not reproduce the matrix.
pub fn svd_sorted(m: &DMatrix<f64>) -> SortedSvd {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return SortedSvd { u: DMatrix::identity(r, r), s: vec![0.0; c], v: DMatrix::identity(c, c) };
    }
    let fm = faer::Mat::<f64>::from_fn(r, c, |i, j| m[(i, j)]);
    let svd = fm.svd().expect("SVD iteration converges");
    let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
    let u = DMatrix::from_fn(r, r, |i, j| fu[(i, j)]);
    let v = DMatrix::from_fn(c, c, |i, j| fv[(i, j)]);
    let mut s: Vec<f64> = (0..r.min(c)).map(|i| fs[i]).collect();
    s.resize(c, 0.0);
    SortedSvd { u, s, v }
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = svd_sorted(a);
    let k = rank_of(&svd.s, 1e-14).min(svd.u.ncols());
    let mut x = DVector::zeros(a.ncols());
    for i in 0..k {
        let coef = svd.u.column(i).dot(b) / svd.s[i];
        x += svd.v.column(i) * coef;
    }
    x
}

/// Number of singular values above the relative threshold.
pub fn rank_of(s: &[f64], rel: f64) -> usize {
    let max = s.first().copied().unwrap_or(0.0);
    if max <= tol::ZERO_ABS {
        return 0;
    }
    s.iter().filter(|&&x| x > rel * max).count()
}

pub fn rank(m: &DMatrix<f64>) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    rank_of(&svd_sorted(m).s, tol::RANK_REL)
}

/// Orthonormal basis (as columns) of the column span of `m`.
pub fn orthonormal_span(m: &DMatrix<f64>) -> DMatrix<f64> {
    orthonormal_span_rel(m, tol::RANK_REL)
}

pub fn orthonormal_span_rel(m: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = svd_sorted(m);
    let k = rank_of(&svd.s, rel).min(svd.u.ncols());
    svd.u.columns(0, k).into_owned()
}

/// Orthonormal basis of the null space of `m`.
pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    null_space_rel(m, tol::RANK_REL)
}

pub fn null_space_rel(m: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let c = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(c, c);
    }
    let svd = svd_sorted(m);
    let k = rank_of(&svd.s, rel);
    svd.v.columns(k, c - k).into_owned()
}

/// Orthonormal basis of the part of `span(ambient)` orthogonal to `span(sub)`.
/// Both arguments must have orthonormal columns.
pub fn complement_in(sub: &DMatrix<f64>, ambient: &DMatrix<f64>) -> DMatrix<f64> {
    let proj = ambient - sub * (sub.transpose() * ambient);
    let k = ambient.ncols().saturating_sub(sub.ncols());
    let svd = svd_sorted(&proj);
    svd.u.columns(0, k.min(svd.u.ncols())).into_owned()
}

/// Orthogonal projector onto the span of orthonormal columns.
pub fn projector(basis: &DMatrix<f64>) -> DMatrix<f64> {
    basis * basis.transpose()
}

/// Principal angles (radians, ascending) between two orthonormal column sets.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    if a.ncols() == 0 || b.ncols() == 0 {
        return Vec::new();
    }
    let m = a.transpose() * b;
    let mut s = svd_sorted(&m).s;
    s.truncate(a.ncols().min(b.ncols()));
    s.iter().map(|&c| c.clamp(-1.0, 1.0).acos()).collect()
}

/// Largest principal angle, or `PI/2` when dimensions differ.
///
/// Computed as `atan2(sin, cos)` with the sine taken from the part of `b`
/// outside `a`, so angles far below `1e-8` are still resolved.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let off = b - a * (a.transpose() * b);
    let sin = svd_sorted(&off).s[0];
    let cos = *svd_sorted(&(a.transpose() * b)).s.last().expect("non-empty");
    sin.atan2(cos)
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let fm = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let eig = fm.self_adjoint_eigen(faer::Side::Lower).expect("eigen iteration converges");
    let (fu, fs) = (eig.U(), eig.S().column_vector());
    let vals = (0..n).map(|i| fs[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, j| fu[(i, j)]);
    (vals, vecs)
}

pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return m.clone();
    }
    m.clone().exp()
}

pub fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

pub fn skew_residual(m: &DMatrix<f64>) -> f64 {
    (m + m.transpose()).norm() * 0.5
}

pub fn orthogonality_residual(m: &DMatrix<f64>) -> f64 {
    (m.transpose() * m - DMatrix::identity(m.ncols(), m.ncols())).norm()
}

pub fn skew_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m - m.transpose()) * 0.5
}

/// Principal square root via the Denman-Beavers iteration.
fn sqrtm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::identity(n, n);
    for _ in 0..100 {
        let yi = y
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Invalid("square root iteration hit a singular matrix".into()))?;
        let zi = z
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Invalid("square root iteration hit a singular matrix".into()))?;
        let y2 = (&y + zi) * 0.5;
        let z2 = (&z + yi) * 0.5;
        let delta = (&y2 - &y).norm();
        y = y2;
        z = z2;
        if delta <= 1e-15 * (1.0 + y.norm()) {
            return Ok(y);
        }
    }
    Ok(y)
}

/// Principal logarithm of an orthogonal matrix, returned skew-symmetric.
///
/// Fails when the matrix has an eigenvalue at -1 (rotation angle pi).
pub fn log_orthogonal(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = q.nrows();
    if n == 0 {
        return Ok(q.clone());
    }
    let eye = DMatrix::<f64>::identity(n, n);
    // An eigenvalue near -1 shows up as a near-singular I + Q.
    let smin = svd_sorted(&(q + &eye)).s.last().copied().unwrap_or(0.0);
    if smin < 1e-6 {
        return Err(Error::Invalid(
            "orthogonal matrix has a rotation angle near pi; logarithm is not unique".into(),
        ));
    }
    let mut a = q.clone();
    let mut k = 0;
    while (&a - &eye).norm() > 0.25 && k < 40 {
        a = sqrtm(&a)?;
        k += 1;
    }
    let x = &a - &eye;
    let mut term = x.clone();
    let mut log = DMatrix::zeros(n, n);
    for j in 1..60 {
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        log += &term * (sign / j as f64);
        term = &term * &x;
        if term.norm() < 1e-18 {
            break;
        }
    }
    Ok(skew_part(&(log * 2f64.powi(k))))
}

/// Column-major flattening.
pub fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Stack column vectors into a matrix.
pub fn columns(n: usize, vs: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, vs.len());
    for (j, v) in vs.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

/// Greatest common divisor on `i64`.
pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

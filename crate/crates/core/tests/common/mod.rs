//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use equifocal::models::{self, combination, involution_adapted};
use equifocal::lie::InvolutionSpec;
use equifocal::orbits::{hermann_orbit_germ, homogeneous_orbit_germ, OrbitGerm};
use equifocal::symspace::SymmetricSpace;
use nalgebra::{DMatrix, DVector};
use num_rational::Rational64;

pub fn cp2() -> Arc<SymmetricSpace> {
    models::complex_projective_plane().unwrap()
}

/// Unit vector (in the metric) along a labelled basis element.
pub fn unit(space: &SymmetricSpace, label: &str) -> DVector<f64> {
    let v = models::labelled(space, label);
    &v / v.norm()
}

/// CP^1 through [e3] as the orbit of S(U(1)xU(2)).
pub fn cp1_in_cp2() -> OrbitGerm {
    let s = cp2();
    let t = involution_adapted(&s, &InvolutionSpec::DiagConjugation(vec![1.0, -1.0, -1.0])).unwrap();
    let z = DVector::zeros(s.dim_g());
    hermann_orbit_germ(s, &t, &z).unwrap()
}

/// Distance in CP^2 from `[e3]` to `[e1]` along the unit `X13` geodesic:
/// the matrix rotation angle is `s / |X13|` and reaches `pi/2`.
pub fn cp2_diameter() -> f64 {
    let s = cp2();
    let x13 = models::labelled(&s, "X13");
    std::f64::consts::PI / 2.0 * x13.norm()
}

/// The base point of CP^2 as the fixed point of its isotropy group.
pub fn point_in_cp2() -> OrbitGerm {
    let s = cp2();
    let k = s.k_basis();
    let z = DVector::zeros(s.dim_g());
    homogeneous_orbit_germ(s, &k, &z).unwrap()
}

/// The base point of SU(3)/SO(3) as the fixed point of SO(3).
pub fn point_in_su3_so3() -> OrbitGerm {
    let s = models::su3_so3().unwrap();
    let k = s.k_basis();
    let z = DVector::zeros(s.dim_g());
    homogeneous_orbit_germ(s, &k, &z).unwrap()
}

/// Principal S(U(1)xU(2)) orbit at distance `t` from CP^1.
pub fn principal_in_cp2(t: f64) -> OrbitGerm {
    let s = cp2();
    let th = involution_adapted(&s, &InvolutionSpec::DiagConjugation(vec![1.0, -1.0, -1.0])).unwrap();
    let off = unit(&s, "X13") * t;
    hermann_orbit_germ(s, &th, &off).unwrap()
}

/// Isoparametric T^3 in S^5 through (r1, 0, r2, 0, 0, r3).
pub fn torus_in_s5(r1: f64, r2: f64) -> OrbitGerm {
    let s = models::sphere(6).unwrap();
    let r3 = (1.0 - r1 * r1 - r2 * r2).sqrt();
    let alpha = r3.acos();
    let w = (r1 * r1 + r2 * r2).sqrt();
    let off = combination(&s, &[("L16", alpha * r1 / w), ("L36", alpha * r2 / w)]);
    let h = models::span_of(&s, &["L12", "L34", "L56"]);
    homogeneous_orbit_germ(s, &h, &off).unwrap()
}

/// Jacobi-field shooting: columns are `J(1)` in the ambient basis for
/// `J(0) = t_a, J'(0) = -A_eta t_a` and `J(0) = 0, J'(0) = nu_j`, integrated
/// with RK4 in a parallel frame where the Jacobi operator is constant.
pub fn shooting_operator(germ: &OrbitGerm, eta: &DVector<f64>, steps: usize) -> DMatrix<f64> {
    let fam = &germ.family;
    let b = fam.ambient_basis(&germ.point);
    let jm = fam.jacobi_matrix(&b, eta);
    let d = b.ncols();
    let a = germ.shape_operator(eta);
    let m = germ.dim();
    let k = germ.codim();
    let mut out = DMatrix::zeros(d, m + k);
    for col in 0..m + k {
        let (mut y, mut yp) = if col < m {
            let t = germ.tangent.column(col).into_owned();
            let at = &germ.tangent * a.column(col);
            (b.transpose() * t, -(b.transpose() * at))
        } else {
            (DVector::zeros(d), b.transpose() * germ.normal.column(col - m))
        };
        let h = 1.0 / steps as f64;
        let f = |y: &DVector<f64>| -(&jm * y);
        for _ in 0..steps {
            let k1y = yp.clone();
            let k1p = f(&y);
            let k2y = &yp + &k1p * (h / 2.0);
            let k2p = f(&(&y + &k1y * (h / 2.0)));
            let k3y = &yp + &k2p * (h / 2.0);
            let k3p = f(&(&y + &k2y * (h / 2.0)));
            let k4y = &yp + &k3p * h;
            let k4p = f(&(&y + &k3y * h));
            y += (k1y + k2y * 2.0 + k3y * 2.0 + k4y) * (h / 6.0);
            yp += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0);
        }
        out.set_column(col, &y);
    }
    out
}

/// Smallest singular value over the largest of a matrix.
pub fn min_ratio(m: &DMatrix<f64>) -> f64 {
    let s = equifocal::linalg::svd_sorted(m).s;
    let n = m.nrows().min(m.ncols());
    s[n - 1] / s[0]
}

/// Sectional curvature of `span{x, y}` in `su(3)` for the metric `-B`, with
/// `B(a, b) = 6 tr(ab)`, computed on complex matrices.
pub fn su3_sectional(x: &nalgebra::DMatrix<nalgebra::Complex<f64>>, y: &nalgebra::DMatrix<nalgebra::Complex<f64>>) -> f64 {
    let b = |a: &nalgebra::DMatrix<nalgebra::Complex<f64>>, c: &nalgebra::DMatrix<nalgebra::Complex<f64>>| (a * c).trace().re * 6.0;
    let br = |a: &nalgebra::DMatrix<nalgebra::Complex<f64>>, c: &nalgebra::DMatrix<nalgebra::Complex<f64>>| a * c - c * a;
    let xy = br(x, y);
    // <R(x, y) y, x> = <-[[x, y], y], x> = B([[x, y], y], x)
    let num = b(&br(&xy, y), x);
    let gxx = -b(x, x);
    let gyy = -b(y, y);
    let gxy = -b(x, y);
    num / (gxx * gyy - gxy * gxy)
}

/// `E_kl - E_lk` and `i (E_kl + E_lk)` in `su(3)`, zero-based indices.
pub fn su3_xy(k: usize, l: usize) -> (nalgebra::DMatrix<nalgebra::Complex<f64>>, nalgebra::DMatrix<nalgebra::Complex<f64>>) {
    use nalgebra::Complex;
    let mut x = nalgebra::DMatrix::from_element(3, 3, Complex::new(0.0, 0.0));
    let mut y = x.clone();
    x[(k, l)] = Complex::new(1.0, 0.0);
    x[(l, k)] = Complex::new(-1.0, 0.0);
    y[(k, l)] = Complex::new(0.0, 1.0);
    y[(l, k)] = Complex::new(0.0, 1.0);
    (x, y)
}

/// A seeded subtorus instance: a lattice, a plane given by lattice
/// coefficient rows, and whether the plane is rational by construction.
pub struct SubtorusInstance {
    pub lattice: DMatrix<f64>,
    /// `d x l` coefficient rows; the plane is spanned by `lattice * rows^T`.
    pub coefficients: DMatrix<f64>,
    /// The integer part of the coefficients.
    pub integer_rows: Vec<Vec<i64>>,
    pub rational: bool,
}

impl SubtorusInstance {
    pub fn plane(&self) -> DMatrix<f64> {
        &self.lattice * self.coefficients.transpose()
    }
}

/// Rational planes are spanned by integer rows `K`; irrational ones by
/// `K + sqrt(m) u v^T` with `v` outside the row space of `K`. Such a plane
/// contains its conjugate under `sqrt(m) -> -sqrt(m)` only if it also
/// contains `v`, which would raise its dimension, so it is not rational.
pub fn subtorus_instances(seed: u64, count: usize) -> Vec<SubtorusInstance> {
    use rand::{Rng, SeedableRng};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let l = r.random_range(2..=4usize);
        let d = r.random_range(1..l);
        let lattice = DMatrix::<f64>::identity(l, l) + DMatrix::from_fn(l, l, |_, _| r.random_range(-0.3..0.3));
        let rows: Vec<Vec<i64>> = (0..d).map(|_| (0..l).map(|_| r.random_range(-3..=3i64)).collect()).collect();
        let k = DMatrix::from_fn(d, l, |i, j| rows[i][j] as f64);
        if equifocal::linalg::rank(&k) < d {
            continue;
        }
        let rational = out.len() % 2 == 0;
        let coefficients = if rational {
            k.clone()
        } else {
            let v = DMatrix::from_fn(1, l, |_, _| r.random_range(-3..=3i64) as f64);
            let stacked = DMatrix::from_fn(d + 1, l, |i, j| if i < d { k[(i, j)] } else { v[(0, j)] });
            if equifocal::linalg::rank(&stacked) < d + 1 {
                continue;
            }
            let m = [2.0f64, 3.0, 5.0, 7.0][r.random_range(0..4usize)];
            let u = DMatrix::from_fn(d, 1, |_, _| r.random_range(1..=2i64) as f64);
            &k + u * v * m.sqrt()
        };
        out.push(SubtorusInstance { lattice, coefficients, integer_rows: rows, rational });
    }
    out
}

/// Exact reduced row echelon form of an integer matrix, nonzero rows only.
pub fn exact_rref(rows: &[Vec<i64>]) -> Vec<Vec<Rational64>> {
    let mut a: Vec<Vec<Rational64>> = rows.iter().map(|r| r.iter().map(|&v| Rational64::from_integer(v)).collect()).collect();
    let (n, m) = (a.len(), a[0].len());
    let mut r = 0;
    for c in 0..m {
        let Some(p) = (r..n).find(|&i| a[i][c] != Rational64::from_integer(0)) else { continue };
        a.swap(r, p);
        let pv = a[r][c];
        for v in a[r].iter_mut() {
            *v /= pv;
        }
        for i in 0..n {
            if i != r {
                let f = a[i][c];
                for j in 0..m {
                    let t = a[r][j] * f;
                    a[i][j] -= t;
                }
            }
        }
        r += 1;
        if r == n {
            break;
        }
    }
    a.truncate(r);
    a
}

pub fn same_rational_span(a: &[Vec<i64>], b: &[Vec<i64>]) -> bool {
    exact_rref(a) == exact_rref(b)
}

pub fn cols(v: &[&[f64]]) -> DMatrix<f64> {
    DMatrix::from_fn(v[0].len(), v.len(), |i, j| v[j][i])
}

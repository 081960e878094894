use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{AmbientKind, OrbitFamily, Point};
use crate::error::{Error, Result};
use crate::linalg;
use crate::symspace::SymmetricSpace;
use crate::tol;

/// Local data of an orbit `H.x` at `x`.
///
/// The shape operator follows `<A_xi X, Y> = <II(X, Y), xi>`, i.e.
/// `A_xi X = -(nabla_X xi)^T`.
#[derive(Clone, Debug)]
pub struct OrbitGerm {
    pub family: Arc<OrbitFamily>,
    pub point: Point,
    /// Orthonormal tangent basis `t_a` (columns in `g` coordinates).
    pub tangent: DMatrix<f64>,
    /// Elements `W_a` of `h` whose Killing fields equal `t_a` at `x`.
    pub generators: DMatrix<f64>,
    /// Orthonormal normal basis `nu_j`.
    pub normal: DMatrix<f64>,
    /// `A_{nu_j}` in the tangent basis.
    pub shape: Vec<DMatrix<f64>>,
    /// Asymmetry of the raw second fundamental form before symmetrizing.
    pub shape_asymmetry: f64,
    /// Half the smallest sampled first focal distance.
    pub epsilon: f64,
}

/// Finite-difference certification of the second fundamental form.
#[derive(Clone, Debug, Serialize)]
pub struct ShapeCertificate {
    pub max_residual: f64,
    pub step: f64,
}

impl OrbitGerm {
    /// Germ of the orbit through `x`; `epsilon` is left infinite.
    pub fn compute(family: Arc<OrbitFamily>, x: Point) -> Self {
        let k = family.killing_matrix(&x);
        let svd = linalg::svd_sorted(&k);
        let m = linalg::rank_of(&svd.s, tol::RANK_REL);
        let tangent = svd.u.columns(0, m).into_owned();
        let mut coeff = svd.v.columns(0, m).into_owned();
        for a in 0..m {
            let s = svd.s[a];
            coeff.column_mut(a).unscale_mut(s);
        }
        let generators = &family.h * coeff;
        let normal = linalg::complement_in(&tangent, &family.ambient_basis(&x));
        let kdim = normal.ncols();
        let mut raw = vec![DMatrix::zeros(m, m); kdim];
        for a in 0..m {
            let wa = generators.column(a).into_owned();
            for b in 0..m {
                let wb = generators.column(b).into_owned();
                let d = family.killing_derivative(&x, &wa, &wb);
                let c = normal.transpose() * d;
                for j in 0..kdim {
                    raw[j][(a, b)] = c[j];
                }
            }
        }
        let mut asym: f64 = 0.0;
        let shape = raw
            .into_iter()
            .map(|s| {
                asym = asym.max((&s - s.transpose()).amax());
                (&s + s.transpose()) * 0.5
            })
            .collect();
        Self {
            family,
            point: x,
            tangent,
            generators,
            normal,
            shape,
            shape_asymmetry: asym,
            epsilon: f64::INFINITY,
        }
    }

    /// Germ at another point of the same orbit, sharing `epsilon`.
    pub fn at(&self, x: Point) -> Self {
        let mut g = Self::compute(self.family.clone(), x);
        g.epsilon = self.epsilon;
        g
    }

    pub fn dim(&self) -> usize {
        self.tangent.ncols()
    }

    pub fn codim(&self) -> usize {
        self.normal.ncols()
    }

    pub fn dim_g(&self) -> usize {
        self.family.dim_g()
    }

    pub fn space(&self) -> &SymmetricSpace {
        &self.family.space
    }

    /// Coordinates of a normal vector in the normal basis.
    pub fn normal_coords(&self, v: &DVector<f64>) -> DVector<f64> {
        self.normal.transpose() * v
    }

    pub fn normal_vector(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.normal * c
    }

    /// Error unless `v` lies in the normal space.
    pub fn check_normal(&self, v: &DVector<f64>) -> Result<()> {
        let r = (v - &self.normal * (self.normal.transpose() * v)).norm();
        if r > tol::MEMBERSHIP * v.norm().max(1.0) {
            return Err(Error::NotInSubspace { space: "the normal space", residual: r });
        }
        Ok(())
    }

    /// `A_xi` in the tangent basis for an ambient normal vector `xi`.
    pub fn shape_operator(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        let c = self.normal_coords(xi);
        let m = self.dim();
        let mut a = DMatrix::zeros(m, m);
        for (j, s) in self.shape.iter().enumerate() {
            a += s * c[j];
        }
        a
    }

    /// `II(t_a, t_b)` as an ambient vector.
    pub fn second_fundamental_form(&self, a: usize, b: usize) -> DVector<f64> {
        let c = DVector::from_iterator(self.codim(), self.shape.iter().map(|s| s[(a, b)]));
        &self.normal * c
    }

    /// Basis of the isotropy subalgebra of `h` at the point.
    pub fn isotropy_basis(&self) -> DMatrix<f64> {
        let k = self.family.killing_matrix(&self.point);
        &self.family.h * linalg::null_space(&k)
    }

    /// Normal curvature endomorphisms `R_perp(t_a, t_b)` in the normal basis,
    /// from the Ricci equation
    /// `<R_perp(x,y) xi, eta> = <R(x,y) xi, eta> + <[A_xi, A_eta] x, y>`.
    pub fn normal_curvature(&self, a: usize, b: usize) -> DMatrix<f64> {
        let k = self.codim();
        let ta = self.tangent.column(a).into_owned();
        let tb = self.tangent.column(b).into_owned();
        DMatrix::from_fn(k, k, |j, i| {
            let xi = self.normal.column(i).into_owned();
            let eta = self.normal.column(j).into_owned();
            let amb = self.family.curvature(&ta, &tb, &xi).dot(&eta);
            let c = &self.shape[i] * &self.shape[j] - &self.shape[j] * &self.shape[i];
            amb + c[(b, a)]
        })
    }

    /// Compare the second fundamental form with central differences of
    /// Killing fields along `exp(s W_a) x`, Richardson-extrapolated.
    pub fn certify_shape(&self, step: f64) -> ShapeCertificate {
        let fam = &self.family;
        let m = self.dim();
        let mut worst: f64 = 0.0;
        for a in 0..m {
            let wa = self.generators.column(a).into_owned();
            for b in 0..m {
                let wb = self.generators.column(b).into_owned();
                let field = |s: f64| {
                    let y = fam.act(&fam.space.exp_ad(&(&wa * s)), &self.point);
                    fam.killing(&wb, &y)
                };
                let central = |h: f64| (field(h) - field(-h)) / (2.0 * h);
                let d = (central(step / 2.0) * 4.0 - central(step)) / 3.0;
                let fd = self.normal.transpose() * d;
                for j in 0..self.codim() {
                    worst = worst.max((fd[j] - self.shape[j][(a, b)]).abs());
                }
            }
        }
        ShapeCertificate { max_residual: worst, step }
    }
}

/// Orbit of `z0` under the isotropy representation of `K` on `p`.
pub fn srep_orbit_germ(space: Arc<SymmetricSpace>, z0: &DVector<f64>) -> Result<OrbitGerm> {
    let r = space.k_component_norm(z0);
    if r > tol::MEMBERSHIP * z0.norm().max(1.0) {
        return Err(Error::NotInSubspace { space: "p", residual: r });
    }
    let h = space.k_basis();
    let fam = Arc::new(OrbitFamily::new(space, AmbientKind::Euclidean, &h)?);
    let mut g = OrbitGerm::compute(fam, Point::Euclidean(z0.clone()));
    g.epsilon = crate::focal::estimate_epsilon(&g);
    Ok(g)
}

/// Fixed subalgebra of an involution `theta_tilde` (adapted coordinates)
/// that commutes with the Cartan involution.
pub fn fixed_algebra_of(space: &SymmetricSpace, theta_tilde: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = space.dim_g();
    if theta_tilde.shape() != (n, n) {
        return Err(Error::Invalid(format!("involution must be {n}x{n}")));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let sq = (theta_tilde * theta_tilde - &eye).norm();
    if sq > 1e-9 {
        return Err(Error::BadInvolution { what: "second involution squared is not id".into(), residual: sq });
    }
    let mut auto: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let ei = eye.column(i).into_owned();
            let ej = eye.column(j).into_owned();
            let lhs = theta_tilde * space.bracket(&ei, &ej);
            let rhs = space.bracket(&(theta_tilde * &ei), &(theta_tilde * &ej));
            auto = auto.max((lhs - rhs).norm());
        }
    }
    if auto > 1e-9 {
        return Err(Error::BadInvolution { what: "second involution is not an automorphism".into(), residual: auto });
    }
    let comm = (theta_tilde * space.theta0() - space.theta0() * theta_tilde).norm();
    if comm > 1e-9 {
        return Err(Error::BadInvolution {
            what: "second involution does not commute with the Cartan involution".into(),
            residual: comm,
        });
    }
    Ok(linalg::null_space(&(theta_tilde - &eye)))
}

fn offset_point(space: &SymmetricSpace, offset: &DVector<f64>) -> Result<Point> {
    let r = space.k_component_norm(offset);
    if r > tol::MEMBERSHIP * offset.norm().max(1.0) {
        return Err(Error::NotInSubspace { space: "p", residual: r });
    }
    Ok(Point::Symmetric(space.exp_at(&space.base_point(), offset)))
}

/// Orbit of `exp(offset).p` under the subgroup with Lie algebra `h`.
pub fn homogeneous_orbit_germ(
    space: Arc<SymmetricSpace>,
    h: &DMatrix<f64>,
    offset: &DVector<f64>,
) -> Result<OrbitGerm> {
    let x = offset_point(&space, offset)?;
    let fam = Arc::new(OrbitFamily::new(space, AmbientKind::Symmetric, h)?);
    let mut g = OrbitGerm::compute(fam, x);
    g.epsilon = crate::focal::estimate_epsilon(&g);
    Ok(g)
}

/// Hermann action: the fixed group of a second involution commuting with
/// the Cartan involution, acting on `N`.
pub fn hermann_orbit_germ(
    space: Arc<SymmetricSpace>,
    theta_tilde: &DMatrix<f64>,
    offset: &DVector<f64>,
) -> Result<OrbitGerm> {
    let h = fixed_algebra_of(&space, theta_tilde)?;
    homogeneous_orbit_germ(space, &h, offset)
}

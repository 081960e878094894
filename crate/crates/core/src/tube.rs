//! Partial tubes around an orbit germ and their exponential images.
//!
//! An element `psi` of the frame bundle `B^u` is stored as a map from normal
//! coordinates at the germ point `p` to `g` coordinates at a base point `q`:
//! closed-form normal transport along a sampled curve composed with an
//! element of `hat G_p`. The partial tube is the set of vectors `psi xi` and
//! its image is the set of points `exp(psi xi)`.
//!
//! At a principal `xi` the section `A = perp_xi(hat G_p xi)` is fixed in
//! `p` coordinates. Its image under `psi`, carried along the geodesic to
//! `exp(psi xi)`, is the normal space of the image tube there, and the
//! parallel normal fields of the image are `exp_*(0, psi nu)` for `nu` in `A`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit;
use crate::focal::{self, preserves_focal_structure, sin_l, FocalProbe, NormalExpDifferential};
use crate::holonomy::HatG;
use crate::lie::{haar_sample, MatrixLieAlgebra};
use crate::linalg;
use crate::orbits::{
    commutator_loop, normal_parallel_transport, segment_map, AmbientKind, CurveSampler, OrbitCurve,
    OrbitFamily, OrbitGerm, Point, TransportMethod,
};
use crate::rng;
use crate::tol::{self, Measured};

/// Step of the central differences used for tube tangents and Jacobians.
const FD_STEP: f64 = 1e-5;
/// Relative singular-value cut for ranks of finite-difference Jacobians.
const FD_RANK_REL: f64 = 1e-6;
/// Half-width of the stencil for the derivative of a moving projector.
const STENCIL: f64 = 1e-3;
/// Random directions used to find the principal orbit dimension.
const ORBIT_PROBES: usize = 32;

#[derive(Clone, Copy, Debug)]
pub struct TubeOptions {
    pub sampler: CurveSampler,
    /// Base curves; each contributes one fibre besides the one at `p`.
    pub n_fibres: usize,
    /// Group samples per fibre, the identity included.
    pub n_group: usize,
    pub seed: u64,
}

impl Default for TubeOptions {
    fn default() -> Self {
        Self { sampler: CurveSampler::default(), n_fibres: 8, n_group: 12, seed: 0x7b3 }
    }
}

/// A sampled `psi` in `B^u` with its provenance.
#[derive(Clone, Debug)]
pub struct FrameIsometry {
    /// Base curve index in the tube, `None` at the germ point.
    pub curve: Option<usize>,
    /// Index into the tube's group samples.
    pub group: usize,
    pub base: Point,
    /// Normal coordinates at `p` to `g` coordinates at `base`.
    pub map: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct TubeFibre {
    pub base_point: Point,
    pub curve: Option<usize>,
    /// Transported normal basis of `p` (columns).
    pub transport: DMatrix<f64>,
    pub transported_xi: DVector<f64>,
    pub orbit_samples: Vec<DVector<f64>>,
    /// Rank of the fibre's tangent vectors at the transported `xi`.
    pub fibre_dim: usize,
}

#[derive(Clone, Debug)]
pub struct PartialTube {
    pub germ: OrbitGerm,
    /// Lie algebra of `hat G_p` on normal coordinates.
    pub algebra: MatrixLieAlgebra,
    pub xi: DVector<f64>,
    pub xi_coords: DVector<f64>,
    pub curves: Vec<OrbitCurve>,
    /// Group samples; the first is the identity.
    pub group: Vec<DMatrix<f64>>,
    /// Fibres; the first sits over `p`.
    pub fibres: Vec<TubeFibre>,
    pub orbit_dim: usize,
    pub max_orbit_dim: usize,
    pub principal: bool,
    /// `xi = 0`: the tube is `M` itself with zero-dimensional fibres.
    pub degenerate: bool,
    /// Orthonormal basis of `perp_xi(hat G_p xi)` in normal coordinates.
    pub section: DMatrix<f64>,
}

/// Columns `X_j v` over the basis of `alg`.
pub fn orbit_matrix(alg: &MatrixLieAlgebra, v: &DVector<f64>) -> DMatrix<f64> {
    let cols: Vec<_> = alg.basis.iter().map(|x| x * v).collect();
    linalg::columns(alg.space_dim, &cols)
}

fn algebra_element(alg: &MatrixLieAlgebra, c: &[f64]) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(alg.space_dim, alg.space_dim);
    for (b, v) in alg.basis.iter().zip(c) {
        x += b * *v;
    }
    x
}

impl PartialTube {
    pub fn family(&self) -> &OrbitFamily {
        &self.germ.family
    }

    /// Dimension of the image tube.
    pub fn dim(&self) -> usize {
        self.germ.dim() + self.orbit_dim
    }

    /// Codimension of the image tube in the ambient space.
    pub fn codim(&self) -> usize {
        self.family().ambient_dim() - self.dim()
    }

    pub fn fibre_dim(&self) -> usize {
        self.orbit_dim
    }

    pub fn fibre_dims_constant(&self) -> bool {
        self.fibres.iter().all(|f| f.fibre_dim == self.orbit_dim)
    }

    pub fn isometry(&self, fibre: usize, group: usize) -> FrameIsometry {
        let f = &self.fibres[fibre];
        FrameIsometry {
            curve: f.curve,
            group,
            base: f.base_point.clone(),
            map: &f.transport * &self.group[group],
        }
    }

    /// All sampled isometries, fibre by fibre.
    pub fn isometries(&self) -> Vec<FrameIsometry> {
        (0..self.fibres.len())
            .flat_map(|f| (0..self.group.len()).map(move |g| (f, g)))
            .map(|(f, g)| self.isometry(f, g))
            .collect()
    }

    /// `exp(psi xi)`.
    pub fn point(&self, iso: &FrameIsometry) -> Point {
        self.family().exp_at(&iso.base, &(&iso.map * &self.xi_coords))
    }

    /// Normal space of the image tube at `exp(psi xi)`.
    pub fn normal_frame(&self, psi: &DMatrix<f64>) -> DMatrix<f64> {
        let eta = psi * &self.xi_coords;
        self.family().geodesic_transport(&eta) * psi * &self.section
    }

    /// Every image point `exp(psi xi)` over all sampled isometries.
    pub fn image_samples(&self) -> Vec<Point> {
        self.isometries().iter().map(|i| self.point(i)).collect()
    }

    pub fn report(&self, equifocal: Option<EquifocalReport>, reconstruction: Option<HausdorffReport>) -> TubeReport {
        TubeReport {
            xi_norm: self.xi.norm(),
            principal: self.principal,
            degenerate: self.degenerate,
            fibre_dim: self.orbit_dim,
            codim: self.codim(),
            equifocal,
            reconstruction,
        }
    }
}

/// Sample the partial tube `B_xi` over `M`.
pub fn build_partial_tube(
    germ: &OrbitGerm,
    hat_g: Option<&HatG>,
    xi: &DVector<f64>,
    opts: &TubeOptions,
) -> Result<PartialTube> {
    let hat_g = hat_g.ok_or_else(|| Error::Dependency("hat G_p must be built before the tube".into()))?;
    let k = germ.codim();
    let alg = hat_g.algebra.algebra.clone();
    if alg.space_dim != k {
        return Err(Error::Dependency(format!(
            "hat G_p acts on dimension {} but the normal space has dimension {k}",
            alg.space_dim
        )));
    }
    germ.check_normal(xi)?;
    let r = xi.norm();
    if r >= germ.epsilon {
        return Err(Error::TubeRadius { radius: r, bound: germ.epsilon });
    }
    let xi_c = germ.normal_coords(xi);
    let degenerate = r <= tol::ZERO_ABS;
    let om = orbit_matrix(&alg, &xi_c);
    let orbit_dim = if degenerate { 0 } else { linalg::rank(&om) };
    let mut rr = rng::seeded(rng::derive(opts.seed, 1));
    let mut max_orbit_dim = orbit_dim;
    for _ in 0..ORBIT_PROBES {
        let v = rng::gaussian_vector(&mut rr, k);
        max_orbit_dim = max_orbit_dim.max(linalg::rank(&orbit_matrix(&alg, &v)));
    }
    let principal = !degenerate && orbit_dim == max_orbit_dim;
    let section = if degenerate {
        DMatrix::zeros(k, 0)
    } else {
        linalg::complement_in(&linalg::orthonormal_span(&om), &DMatrix::identity(k, k))
    };
    let curves = if germ.dim() == 0 {
        Vec::new()
    } else {
        opts.sampler.sample_many(&germ.family, opts.n_fibres, rng::derive(opts.seed, 2))
    };
    let mut group = vec![DMatrix::identity(k, k)];
    group.extend(
        haar_sample(&alg, opts.n_group.saturating_sub(1), rng::derive(opts.seed, 3)).into_iter().map(|g| g.matrix),
    );
    let transported: Vec<Result<(Point, DMatrix<f64>)>> = curves
        .par_iter()
        .map(|c| {
            let t = normal_parallel_transport(&germ.family, &germ.point, c, &germ.normal, TransportMethod::ClosedForm)?;
            Ok((t.end_point().clone(), t.end_frame().clone()))
        })
        .collect();
    let mut bases = vec![(None, germ.point.clone(), germ.normal.clone())];
    for (i, t) in transported.into_iter().enumerate() {
        let (q, f) = t?;
        bases.push((Some(i), q, f));
    }
    let fibres = bases
        .into_iter()
        .map(|(curve, q, f)| TubeFibre {
            orbit_samples: group.iter().map(|g| &f * (g * &xi_c)).collect(),
            fibre_dim: if degenerate { 0 } else { linalg::rank(&(&f * &om)) },
            transported_xi: &f * &xi_c,
            base_point: q,
            curve,
            transport: f,
        })
        .collect();
    Ok(PartialTube {
        germ: germ.clone(),
        algebra: alg,
        xi: xi.clone(),
        xi_coords: xi_c,
        curves,
        group,
        fibres,
        orbit_dim,
        max_orbit_dim,
        principal,
        degenerate,
        section,
    })
}

fn require_principal(tube: &PartialTube, what: &str) -> Result<()> {
    if !tube.principal {
        return Err(Error::Precondition(format!(
            "{what} needs a principal tube (orbit dimension {} of {})",
            tube.orbit_dim, tube.max_orbit_dim
        )));
    }
    Ok(())
}

/// The normal section at a fibre sample with its flatness residuals.
#[derive(Clone, Debug, Serialize)]
pub struct NormalSection {
    /// Orthonormal columns in `g` coordinates at the base point.
    #[serde(skip)]
    pub basis: DMatrix<f64>,
    pub dim: usize,
    /// Largest `|[a_i, a_j]|` over section basis pairs.
    pub bracket_residual: f64,
    /// Largest operator norm of `R(eta/|eta|, a)` on the tangent space.
    pub curvature_residual: f64,
    pub abelian: bool,
}

/// `psi perp_xi(hat G_p xi)` at `psi xi`, certified abelian.
pub fn tube_normal_section(tube: &PartialTube, iso: &FrameIsometry) -> Result<NormalSection> {
    require_principal(tube, "the normal section")?;
    let fam = tube.family();
    let basis = &iso.map * &tube.section;
    let eta = &iso.map * &tube.xi_coords;
    let (mut br, mut cv): (f64, f64) = (0.0, 0.0);
    if fam.kind == AmbientKind::Symmetric {
        let sp = &fam.space;
        let eta_u = &eta / eta.norm();
        let amb = fam.ambient_basis(&iso.base);
        for i in 0..basis.ncols() {
            let a = basis.column(i).into_owned();
            for j in i + 1..basis.ncols() {
                br = br.max(sp.bracket(&a, &basis.column(j).into_owned()).norm());
            }
            // R(eta, a) = -ad [eta, a] on the tangent space.
            let c = sp.bracket(&eta_u, &a);
            cv = cv.max(linalg::svd_sorted(&(sp.ad(&c) * &amb)).s[0]);
        }
    }
    Ok(NormalSection {
        dim: basis.ncols(),
        basis,
        bracket_residual: br,
        curvature_residual: cv,
        abelian: br <= tol::ABELIAN && cv <= tol::ABELIAN,
    })
}

/// `J(1)` for the Jacobi field with `J(0) = 0`, `J'(0) = v` along the
/// geodesic from `base` with velocity `eta`.
fn jacobi_value(fam: &OrbitFamily, base: &Point, eta: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let amb = fam.ambient_basis(base);
    let (vals, vecs) = linalg::sym_eigen(&fam.jacobi_matrix(&amb, eta));
    let w = &amb * vecs;
    let mut c = w.transpose() * v;
    for (h, l) in vals.iter().enumerate() {
        c[h] *= sin_l(*l);
    }
    fam.geodesic_transport(eta) * (w * c)
}

fn check_in_section(tube: &PartialTube, nu: &DVector<f64>) -> Result<()> {
    let s = &tube.section;
    let r = (nu - s * (s.transpose() * nu)).norm();
    if r > tol::MEMBERSHIP * nu.norm().max(1.0) {
        return Err(Error::NotInSubspace { space: "the normal section", residual: r });
    }
    Ok(())
}

/// Value at `exp(psi xi)` of the parallel normal field determined by `nu`
/// (normal coordinates in the section at `xi`): `exp_*(0, psi nu)`.
pub fn parallel_normal_field(tube: &PartialTube, nu: &DVector<f64>, iso: &FrameIsometry) -> Result<DVector<f64>> {
    require_principal(tube, "a parallel normal field")?;
    check_in_section(tube, nu)?;
    let fam = tube.family();
    Ok(jacobi_value(fam, &iso.base, &(&iso.map * &tube.xi_coords), &(&iso.map * nu)))
}

/// The map `psi xi -> psi rho` on sampled isometries.
#[derive(Clone, Debug, Serialize)]
pub struct OmegaProjection {
    /// `(psi xi, psi rho)` for every sampled isometry.
    #[serde(skip)]
    pub pairs: Vec<(DVector<f64>, DVector<f64>)>,
    pub source_orbit_dim: usize,
    pub image_orbit_dim: usize,
    /// Largest `|g rho - rho|` over sampled `g` fixing `xi`.
    pub isotropy_residual: f64,
    pub identity: bool,
}

fn isotropy_elements(tube: &PartialTube, count: usize, seed: u64) -> Vec<DMatrix<f64>> {
    let alg = &tube.algebra;
    let ns = linalg::null_space(&orbit_matrix(alg, &tube.xi_coords));
    if ns.ncols() == 0 {
        return Vec::new();
    }
    let mut r = rng::seeded(seed);
    (0..count)
        .map(|_| {
            let c = &ns * rng::gaussian_vector(&mut r, ns.ncols());
            linalg::expm(&(algebra_element(alg, c.as_slice()) * PI))
        })
        .collect()
}

/// `Omega_{xi, rho}` with `rho - xi` in the section at `xi`.
pub fn omega_projection(tube: &PartialTube, rho: &DVector<f64>) -> Result<OmegaProjection> {
    require_principal(tube, "the tube projection")?;
    let nu = rho - &tube.xi_coords;
    check_in_section(tube, &nu)?;
    let alg = &tube.algebra;
    let ns = linalg::null_space(&orbit_matrix(alg, &tube.xi_coords));
    let rn = rho.norm().max(tol::ZERO_ABS);
    let mut res: f64 = 0.0;
    for j in 0..ns.ncols() {
        let y = algebra_element(alg, ns.column(j).as_slice());
        res = res.max((y * rho).norm() / rn);
    }
    for g in isotropy_elements(tube, 8, 0x15_0e) {
        res = res.max((&g * rho - rho).norm() / rn);
    }
    if res > tol::WELL_DEFINED {
        return Err(Error::Consistency(format!(
            "isotropy of xi moves rho by {res:.3e}; xi is not principal or the group is under-sampled"
        )));
    }
    let pairs = tube
        .isometries()
        .iter()
        .map(|i| (&i.map * &tube.xi_coords, &i.map * rho))
        .collect();
    let image_orbit_dim = if rho.norm() <= tol::ZERO_ABS { 0 } else { linalg::rank(&orbit_matrix(alg, rho)) };
    Ok(OmegaProjection {
        pairs,
        source_orbit_dim: tube.orbit_dim,
        image_orbit_dim,
        isotropy_residual: res,
        identity: nu.norm() <= tol::ZERO_ABS,
    })
}

/// Local parameterization of `B^u` near a sampled isometry: base motion
/// `exp(sum s_a W_a)` with normal transport, then right multiplication by
/// `exp(sum t_j X_j)` in `hat G_p`.
pub struct TubeChart<'a> {
    tube: &'a PartialTube,
    pub germ_q: OrbitGerm,
    pub frame: DMatrix<f64>,
}

impl<'a> TubeChart<'a> {
    pub fn new(tube: &'a PartialTube, iso: &FrameIsometry) -> Self {
        let germ_q = if iso.curve.is_none() { tube.germ.clone() } else { tube.germ.at(iso.base.clone()) };
        Self { tube, germ_q, frame: iso.map.clone() }
    }

    /// Chart at `frame` over the point of `germ_q`, which must lie on `M`.
    pub fn with_germ(tube: &'a PartialTube, germ_q: OrbitGerm, frame: DMatrix<f64>) -> Self {
        Self { tube, germ_q, frame }
    }

    pub fn n_base(&self) -> usize {
        self.germ_q.dim()
    }

    pub fn n_params(&self) -> usize {
        self.germ_q.dim() + self.tube.algebra.dim()
    }

    /// Base point and `psi` at the parameters `(s, t)`.
    pub fn isometry(&self, params: &DVector<f64>) -> (Point, DMatrix<f64>) {
        let m = self.n_base();
        let fam = &self.germ_q.family;
        let z = &self.germ_q.generators * params.rows(0, m);
        let q = fam.act(&fam.space.exp_ad(&z), &self.germ_q.point);
        let x = algebra_element(&self.tube.algebra, &params.as_slice()[m..]);
        let psi = segment_map(fam, &self.germ_q.point, &z, 1.0) * &self.frame * linalg::expm(&x);
        (q, psi)
    }

    /// `exp(psi xi)` at the parameters.
    pub fn point(&self, params: &DVector<f64>) -> Point {
        let (q, psi) = self.isometry(params);
        self.germ_q.family.exp_at(&q, &(psi * &self.tube.xi_coords))
    }
}

fn fd_jacobian<F: Fn(&DVector<f64>) -> DVector<f64>>(f: F, n: usize) -> DMatrix<f64> {
    let x0 = DVector::zeros(n);
    let m = f(&x0).len();
    let mut j = DMatrix::zeros(m, n);
    for i in 0..n {
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[i] += FD_STEP;
        xm[i] -= FD_STEP;
        j.set_column(i, &((f(&xp) - f(&xm)) / (2.0 * FD_STEP)));
    }
    j
}

fn fd_rank(j: &DMatrix<f64>) -> usize {
    if j.ncols() == 0 {
        return 0;
    }
    linalg::rank_of(&linalg::svd_sorted(j).s, FD_RANK_REL)
}

fn concat(a: DVector<f64>, b: DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

/// The integer identity `dim ker exp_tube = dim ker Omega_* + dim ker exp_M`
/// at the parallel field through `rho`.
#[derive(Clone, Debug, Serialize)]
pub struct RankAdditivity {
    /// Kernel of the normal exponential of the image tube at `nu_hat`.
    pub tube_kernel: usize,
    pub omega_kernel: usize,
    /// Focal multiplicity of `M` at `rho`.
    pub base_kernel: usize,
    pub tube_dim: usize,
    pub holds: bool,
}

/// Kernel dimensions from ranks of finite-difference Jacobians of maps
/// assembled on a chart at `p`.
pub fn rank_additivity(tube: &PartialTube, rho: &DVector<f64>) -> Result<RankAdditivity> {
    omega_projection(tube, rho)?;
    let fam = tube.family();
    let chart = TubeChart::new(tube, &tube.isometry(0, 0));
    let n = chart.n_params();
    let s = tube.section.ncols();
    let c = tube.section.transpose() * (rho - &tube.xi_coords);
    let split = |x: &DVector<f64>| (x.rows(0, n).into_owned(), x.rows(n, s).into_owned());
    let bundle = |x: &DVector<f64>| {
        let (pr, w) = split(x);
        let (q, psi) = chart.isometry(&pr);
        let pt = fam.exp_at(&q, &(&psi * &tube.xi_coords));
        let nv = tube.normal_frame(&psi) * (&c + w);
        (pt, nv)
    };
    let dg = fd_jacobian(
        |x| {
            let (pt, nv) = bundle(x);
            concat(fam.embed(&pt), nv)
        },
        n + s,
    );
    let df = fd_jacobian(
        |x| {
            let (pt, nv) = bundle(x);
            fam.embed(&fam.exp_at(&pt, &nv))
        },
        n + s,
    );
    let on_b = |v: &DVector<f64>| {
        let v = v.clone();
        let chart = &chart;
        move |x: &DVector<f64>| {
            let (q, psi) = chart.isometry(x);
            concat(fam.embed(&q), &psi * &v)
        }
    };
    let dp = fd_jacobian(on_b(&tube.xi_coords), n);
    let domega = fd_jacobian(on_b(rho), n);
    let tube_kernel = fd_rank(&dg) - fd_rank(&df);
    let omega_kernel = fd_rank(&dp) - fd_rank(&domega);
    let base_kernel = NormalExpDifferential::new(&tube.germ, &tube.germ.normal_vector(rho))?.kernel_dim();
    Ok(RankAdditivity {
        tube_kernel,
        omega_kernel,
        base_kernel,
        tube_dim: fd_rank(&dg) - s,
        holds: tube_kernel == omega_kernel + base_kernel,
    })
}

/// Sampling budgets for `verify_equifocal`.
#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub n_isometries: usize,
    /// Random directions per isometry for the focal-preservation probes.
    pub n_focal_directions: usize,
    pub n_loops: usize,
    pub loop_size: f64,
    pub ode_step: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { n_isometries: 16, n_focal_directions: 2, n_loops: 6, loop_size: 0.3, ode_step: 0.01, seed: 0xe9f }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WorstResiduals {
    pub bracket: Measured,
    pub curvature: Measured,
    /// `|psi nu - psi k nu|` for `k` fixing `xi`, through the field formula.
    pub well_definedness: Measured,
    /// Normal frame against finite-difference tangents of the image tube.
    pub normal_space: Measured,
    /// `|H - I|` for the loop holonomy `H` of the image normal bundle.
    pub loop_holonomy: Measured,
    /// ODE-transported frame against the parallel field formula.
    pub parallel_field: Measured,
    /// Largest focal-radius disagreement between isometries.
    pub focal_radius_spread: Measured,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquifocalReport {
    pub degenerate: bool,
    pub abelian: bool,
    pub globally_flat: bool,
    pub constant_focal: bool,
    pub worst_residuals: WorstResiduals,
    pub isometries_checked: usize,
    pub loops_checked: usize,
    pub loops_skipped: usize,
    /// Isometries whose tangent rank plus section dimension missed the
    /// ambient dimension.
    pub normal_rank_mismatches: usize,
    /// Tube focal profiles disagreeing with the one at `p`.
    pub profile_mismatches: usize,
    pub failing_probe: Option<FocalProbe>,
    pub notes: Vec<String>,
}

fn measured(value: f64, tolerance: f64) -> Measured {
    Measured::new(value, tolerance)
}

/// One smooth piece of a loop in `B^u`.
#[derive(Clone, Debug)]
enum Piece {
    /// Base motion `exp(u z)` from `start` with normal transport of `frame`.
    Segment { start: Point, z: DVector<f64>, length: f64, frame: DMatrix<f64> },
    /// `left exp(u x) right` over a fixed base point.
    Group { base: Point, left: DMatrix<f64>, x: DMatrix<f64>, right: DMatrix<f64>, length: f64 },
}

impl Piece {
    fn length(&self) -> f64 {
        match self {
            Piece::Segment { length, .. } | Piece::Group { length, .. } => *length,
        }
    }

    fn eval(&self, fam: &OrbitFamily, u: f64) -> (Point, DMatrix<f64>) {
        match self {
            Piece::Segment { start, z, frame, .. } => {
                let q = fam.act(&fam.space.exp_ad(&(z * u)), start);
                (q, segment_map(fam, start, z, u) * frame)
            }
            Piece::Group { base, left, x, right, .. } => (base.clone(), left * linalg::expm(&(x * u)) * right),
        }
    }
}

/// Segments of `curve` from `start`, carrying `frame`.
fn curve_pieces(fam: &OrbitFamily, curve: &OrbitCurve, start: &Point, frame: &DMatrix<f64>) -> Vec<Piece> {
    let mut out = Vec::new();
    let mut cur = start.clone();
    let mut f = frame.clone();
    for s in &curve.segments {
        let p = Piece::Segment { start: cur.clone(), z: s.generator.clone(), length: s.length, frame: f.clone() };
        let (q, g) = p.eval(fam, s.length);
        cur = q;
        f = g;
        out.push(p);
    }
    out
}

/// Smallest `T > 0` with `exp(T x) = I`, tried at the top frequency.
fn closing_period(x: &DMatrix<f64>) -> Option<f64> {
    let (vals, _) = linalg::sym_eigen(&(x.transpose() * x));
    let w = vals.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    if w <= tol::ZERO_ABS {
        return None;
    }
    let t = 2.0 * PI / w;
    let k = x.nrows();
    ((linalg::expm(&(x * t)) - DMatrix::identity(k, k)).norm() <= 1e-9).then_some(t)
}

fn closing_generator(alg: &MatrixLieAlgebra, r: &mut rng::Rng) -> Option<(DMatrix<f64>, f64)> {
    if alg.dim() == 0 {
        return None;
    }
    let start = index::sample(r, alg.dim(), 1).index(0);
    (0..alg.dim()).map(|i| &alg.basis[(start + i) % alg.dim()]).find_map(|x| closing_period(x).map(|t| (x.clone(), t)))
}

/// Loops of `B^u` based at `germ.normal * g0`; `None` marks a skipped loop.
fn build_loops(tube: &PartialTube, opts: &VerifyOptions) -> Vec<Option<Vec<Piece>>> {
    let germ = &tube.germ;
    let fam = tube.family();
    let alg = &tube.algebra;
    let mut r = rng::seeded(rng::derive(opts.seed, 20));
    let has_base = germ.dim() > 0 && fam.dim_h() >= 2;
    let mut loops = Vec::new();
    for i in 0..opts.n_loops {
        let g0 = &tube.group[i % tube.group.len()];
        let start = &germ.normal * g0;
        let kind = if has_base { i % 3 } else { 1 };
        let lp = match kind {
            0 => {
                let za = rng::unit_in_span(&mut r, &fam.h);
                let zb = rng::unit_in_span(&mut r, &fam.h);
                let c = commutator_loop(fam, &za, &zb, opts.loop_size);
                let mut pieces = curve_pieces(fam, &c, &germ.point, &start);
                let last = pieces.last().expect("four segments");
                let (_, end) = last.eval(fam, last.length());
                let tau = germ.normal.transpose() * end * g0.transpose();
                match linalg::log_orthogonal(&tau) {
                    Ok(l) if alg.contains(&l, 1e-6) || l.norm() <= 1e-10 => {
                        pieces.push(Piece::Group {
                            base: germ.point.clone(),
                            left: &germ.normal * &tau,
                            x: -l,
                            right: g0.clone(),
                            length: 1.0,
                        });
                        Some(pieces)
                    }
                    _ => None,
                }
            }
            1 => closing_generator(alg, &mut r).map(|(x, t)| {
                vec![Piece::Group { base: germ.point.clone(), left: start.clone(), x, right: DMatrix::identity(alg.space_dim, alg.space_dim), length: t }]
            }),
            _ => {
                let curve = if tube.curves.is_empty() {
                    None
                } else {
                    Some(tube.curves[i % tube.curves.len()].clone())
                };
                match (curve, closing_generator(alg, &mut r)) {
                    (Some(c), Some((x, t))) => {
                        let mut pieces = curve_pieces(fam, &c, &germ.point, &start);
                        let end = c.end_point(fam, &germ.point);
                        let last = pieces.last().expect("non-empty curve");
                        let (_, f) = last.eval(fam, last.length());
                        let k = alg.space_dim;
                        pieces.push(Piece::Group { base: end.clone(), left: f.clone(), x: x.clone(), right: DMatrix::identity(k, k), length: t });
                        let back_frame = &f * linalg::expm(&(x * t));
                        pieces.extend(curve_pieces(fam, &c.reversed(), &end, &back_frame));
                        Some(pieces)
                    }
                    _ => None,
                }
            }
        };
        loops.push(lp);
    }
    loops
}

/// Derivative of a moving projector by a four-point stencil.
fn projector_derivative<F: Fn(f64) -> DMatrix<f64>>(proj: &F, u: f64) -> DMatrix<f64> {
    let d = STENCIL;
    (proj(u - 2.0 * d) - proj(u + 2.0 * d) + (proj(u + d) - proj(u - d)) * 8.0) / (12.0 * d)
}

/// Transport of an image-tube normal frame around one loop by RK4 on
/// `V' = P' V`; returns `(|H - I|, worst field residual)`.
fn loop_transport(tube: &PartialTube, pieces: &[Piece], step: f64) -> (f64, f64) {
    let fam = tube.family();
    let frame_at = |p: &Piece, u: f64| {
        let (_, psi) = p.eval(fam, u);
        tube.normal_frame(&psi)
    };
    let field_at = |p: &Piece, u: f64| {
        let (q, psi) = p.eval(fam, u);
        let eta = &psi * &tube.xi_coords;
        let cols: Vec<_> = (0..tube.section.ncols())
            .map(|j| jacobi_value(fam, &q, &eta, &(&psi * tube.section.column(j))))
            .collect();
        linalg::columns(fam.dim_g(), &cols)
    };
    let v0 = frame_at(&pieces[0], 0.0);
    let mut v = v0.clone();
    let mut field_res: f64 = 0.0;
    for p in pieces {
        let proj = |u: f64| linalg::projector(&frame_at(p, u));
        let steps = (p.length().abs() / step).ceil().max(1.0) as usize;
        let h = p.length() / steps as f64;
        for i in 0..steps {
            let s = i as f64 * h;
            let k1 = projector_derivative(&proj, s) * &v;
            let mid = projector_derivative(&proj, s + h / 2.0);
            let k2 = &mid * (&v + &k1 * (h / 2.0));
            let k3 = &mid * (&v + &k2 * (h / 2.0));
            let k4 = projector_derivative(&proj, s + h) * (&v + &k3 * h);
            v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            field_res = field_res.max((&v - field_at(p, s + h)).norm());
        }
    }
    let hol = v0.transpose() * &v;
    let s = hol.nrows();
    ((hol - DMatrix::identity(s, s)).norm(), field_res)
}

/// Focal events of the image tube along the parallel field `t nu`, read off
/// from `M` along the line `psi (xi + t nu)` plus the orbit-dimension drop of
/// `hat G_p` on that line.
fn line_profile(
    tube: &PartialTube,
    germ_q: &OrbitGerm,
    psi: &DMatrix<f64>,
    nu: &DVector<f64>,
) -> Result<Vec<(f64, usize)>> {
    let alg = &tube.algebra;
    let d = tube.orbit_dim;
    let om_scale = linalg::svd_sorted(&orbit_matrix(alg, &tube.xi_coords)).s.first().copied().unwrap_or(1.0).max(tol::ZERO_ABS);
    let line = |t: f64| &tube.xi_coords + nu * t;
    let omega_ratio = |rho: &DVector<f64>| {
        if d == 0 {
            1.0
        } else {
            linalg::svd_sorted(&orbit_matrix(alg, rho)).s[d - 1] / om_scale
        }
    };
    let ratio = |t: f64| {
        let rho = line(t);
        let m = NormalExpDifferential::unchecked(germ_q, &(psi * &rho)).min_ratio();
        m.min(omega_ratio(&rho))
    };
    let mut limit = focal::default_scan_limit(germ_q, &(psi * nu));
    if !limit.is_finite() {
        limit = 2.0 * tube.xi.norm();
    }
    limit += tube.xi.norm();
    let minima = focal::vanishing_minima(ratio, limit, false)?;
    Ok(minima
        .into_iter()
        .map(|(t, _)| {
            let rho = line(t);
            let km = NormalExpDifferential::unchecked(germ_q, &(psi * &rho)).kernel_dim();
            let s = linalg::svd_sorted(&orbit_matrix(alg, &rho)).s;
            let rank = s.iter().take(d).filter(|&&x| x > tol::FOCAL_REL * om_scale).count();
            (t, km + d - rank)
        })
        .collect())
}

fn select_isometries(tube: &PartialTube, n: usize, seed: u64) -> Vec<FrameIsometry> {
    let all = tube.isometries();
    if all.len() <= n || n == 0 {
        return all;
    }
    let mut r = rng::seeded(seed);
    let mut idx: Vec<usize> = index::sample(&mut r, all.len() - 1, n - 1).into_iter().map(|i| i + 1).collect();
    idx.sort_unstable();
    std::iter::once(0).chain(idx).map(|i| all[i].clone()).collect()
}

/// Check the three equifocality conditions on the sampled image tube.
pub fn verify_equifocal(tube: &PartialTube, opts: &VerifyOptions) -> Result<EquifocalReport> {
    let mut worst = WorstResiduals {
        bracket: measured(0.0, tol::ABELIAN),
        curvature: measured(0.0, tol::ABELIAN),
        well_definedness: measured(0.0, tol::WELL_DEFINED),
        normal_space: measured(0.0, tol::WELL_DEFINED),
        loop_holonomy: measured(0.0, tol::FLAT),
        parallel_field: measured(0.0, tol::PARALLEL),
        focal_radius_spread: measured(0.0, tol::FOCAL_RADIUS),
    };
    if tube.degenerate {
        return Ok(EquifocalReport {
            degenerate: true,
            abelian: true,
            globally_flat: true,
            constant_focal: true,
            worst_residuals: worst,
            isometries_checked: 0,
            loops_checked: 0,
            loops_skipped: 0,
            normal_rank_mismatches: 0,
            profile_mismatches: 0,
            failing_probe: None,
            notes: vec!["xi = 0: fibres are zero-dimensional and the tube is M itself".into()],
        });
    }
    require_principal(tube, "equifocality verification")?;
    let fam = tube.family();
    let mut notes = Vec::new();
    let isos = select_isometries(tube, opts.n_isometries, rng::derive(opts.seed, 1));
    let germs: Vec<OrbitGerm> = tube
        .fibres
        .par_iter()
        .map(|f| if f.curve.is_none() { tube.germ.clone() } else { tube.germ.at(f.base_point.clone()) })
        .collect();
    let fibre_of = |iso: &FrameIsometry| iso.curve.map_or(0, |c| c + 1);

    // Abelian sections.
    let sections: Vec<NormalSection> = isos.par_iter().map(|i| tube_normal_section(tube, i)).collect::<Result<_>>()?;
    for s in &sections {
        worst.bracket.value = worst.bracket.value.max(s.bracket_residual);
        worst.curvature.value = worst.curvature.value.max(s.curvature_residual);
    }
    let abelian = sections.iter().all(|s| s.abelian);

    // Well-definedness of the parallel fields under the isotropy of xi.
    let fix = isotropy_elements(tube, 4, rng::derive(opts.seed, 2));
    for iso in &isos {
        let eta = &iso.map * &tube.xi_coords;
        for j in 0..tube.section.ncols() {
            let a = tube.section.column(j).into_owned();
            let base = jacobi_value(fam, &iso.base, &eta, &(&iso.map * &a));
            for k in &fix {
                let other = jacobi_value(fam, &iso.base, &eta, &(&iso.map * k * &a));
                worst.well_definedness.value = worst.well_definedness.value.max((&base - other).norm());
            }
        }
    }

    // Normal frames against tangents of the image tube.
    let ambient = fam.ambient_dim();
    let s_dim = tube.section.ncols();
    let normal_checks: Vec<(f64, bool)> = isos
        .par_iter()
        .map(|iso| {
            let chart = TubeChart::new(tube, iso);
            let n = chart.n_params();
            let x0 = chart.point(&DVector::zeros(n));
            let j = fd_jacobian(|p| fam.embed(&chart.point(p)), n);
            let vels: Vec<_> = (0..n).map(|i| fam.velocity(&x0, &j.column(i).into_owned())).collect();
            let vm = linalg::columns(fam.dim_g(), &vels);
            let frame = tube.normal_frame(&iso.map);
            let scale = vels.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let mut res: f64 = 0.0;
            for v in &vels {
                if v.norm() > 1e-6 * scale {
                    res = res.max((frame.transpose() * v).norm() / v.norm());
                }
            }
            (res, fd_rank(&vm) + s_dim == ambient)
        })
        .collect();
    let mut normal_rank_mismatches = 0;
    for (res, ok) in &normal_checks {
        worst.normal_space.value = worst.normal_space.value.max(*res);
        if !ok {
            normal_rank_mismatches += 1;
        }
    }
    if normal_rank_mismatches > 0 {
        notes.push(format!("{normal_rank_mismatches} isometries where tangent rank plus section dimension missed {ambient}"));
    }

    // Loop transports of the image normal bundle.
    let loops = build_loops(tube, opts);
    let loops_skipped = loops.iter().filter(|l| l.is_none()).count();
    let results: Vec<(f64, f64)> =
        loops.par_iter().flatten().map(|pieces| loop_transport(tube, pieces, opts.ode_step)).collect();
    for (h, f) in &results {
        worst.loop_holonomy.value = worst.loop_holonomy.value.max(*h);
        worst.parallel_field.value = worst.parallel_field.value.max(*f);
    }
    if loops_skipped > 0 {
        notes.push(format!("{loops_skipped} loops could not be closed inside hat G_p and were skipped"));
    }
    let globally_flat = worst.well_definedness.pass()
        && worst.normal_space.pass()
        && worst.loop_holonomy.pass()
        && worst.parallel_field.pass()
        && normal_rank_mismatches == 0;

    // Focal structure: preservation by each psi, then tube profiles.
    let probes: Vec<Result<focal::FocalPreservation>> = isos
        .par_iter()
        .enumerate()
        .map(|(i, iso)| {
            preserves_focal_structure(
                &tube.germ,
                &germs[fibre_of(iso)],
                &iso.map,
                opts.n_focal_directions,
                rng::derive(opts.seed, 100 + i as u64),
            )
        })
        .collect();
    let mut failing_probe = None;
    let mut preserved = true;
    for (i, p) in probes.into_iter().enumerate() {
        match p {
            Ok(fp) => {
                if let Some(j) = fp.first_failure {
                    preserved = false;
                    if failing_probe.is_none() {
                        failing_probe = Some(fp.probes[j].clone());
                        notes.push(format!("focal structure not preserved by isometry {i} (fibre {})", fibre_of(&isos[i])));
                    }
                }
            }
            Err(e) => {
                preserved = false;
                notes.push(format!("focal probe on isometry {i} failed: {e}"));
            }
        }
    }
    let mut dirs: Vec<DVector<f64>> = Vec::new();
    for j in 0..s_dim {
        let a = tube.section.column(j).into_owned();
        dirs.push(-&a);
        dirs.push(a);
    }
    let profiles: Vec<Result<Vec<Vec<(f64, usize)>>>> = isos
        .par_iter()
        .map(|iso| dirs.iter().map(|nu| line_profile(tube, &germs[fibre_of(iso)], &iso.map, nu)).collect())
        .collect();
    let mut profile_mismatches = 0;
    let mut reference: Option<Vec<Vec<(f64, usize)>>> = None;
    for (i, p) in profiles.into_iter().enumerate() {
        let p = match p {
            Ok(p) => p,
            Err(e) => {
                profile_mismatches += 1;
                notes.push(format!("tube focal profile on isometry {i} failed: {e}"));
                continue;
            }
        };
        let Some(r) = &reference else {
            reference = Some(p);
            continue;
        };
        let mut bad = false;
        for (a, b) in r.iter().zip(&p) {
            let n = a.len().max(b.len());
            for e in 0..n {
                match (a.get(e), b.get(e)) {
                    (Some(x), Some(y)) => {
                        let spread = (x.0 - y.0).abs();
                        worst.focal_radius_spread.value = worst.focal_radius_spread.value.max(spread);
                        bad |= x.1 != y.1 || spread > tol::FOCAL_RADIUS;
                    }
                    (Some(x), None) | (None, Some(x)) => {
                        worst.focal_radius_spread.value = worst.focal_radius_spread.value.max(x.0);
                        bad = true;
                    }
                    (None, None) => {}
                }
            }
        }
        if bad {
            profile_mismatches += 1;
        }
    }
    if profile_mismatches > 0 {
        notes.push(format!("{profile_mismatches} tube focal profiles differ from the one at p"));
    }
    Ok(EquifocalReport {
        degenerate: false,
        abelian,
        globally_flat,
        constant_focal: preserved && profile_mismatches == 0,
        worst_residuals: worst,
        isometries_checked: isos.len(),
        loops_checked: results.len(),
        loops_skipped,
        normal_rank_mismatches,
        profile_mismatches,
        failing_probe,
        notes,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct HausdorffOptions {
    /// Samples on each side; at least 200 for the reported check.
    pub samples: usize,
    /// Nearest samples used as starting points for each refinement.
    pub starts: usize,
    pub seed: u64,
}

impl Default for HausdorffOptions {
    fn default() -> Self {
        Self { samples: 200, starts: 3, seed: 0x4a5d }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HausdorffReport {
    /// Largest distance from an image-tube sample to the reference orbit.
    pub hausdorff_forward: Measured,
    /// Largest distance from a reference sample to the image tube.
    pub hausdorff_backward: Measured,
    pub samples_tube: usize,
    pub samples_reference: usize,
    pub tube_dim: usize,
    pub reference_dim: usize,
    pub structural_failure: Option<String>,
    pub pass: bool,
}

fn nearest(x: &DVector<f64>, pts: &[DVector<f64>], k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = pts.iter().enumerate().map(|(i, p)| ((p - x).norm(), i)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0));
    d.into_iter().take(k.max(1)).map(|(_, i)| i).collect()
}

/// Sampled symmetric Hausdorff distance between the image tube and a
/// reference orbit, each sample refined onto the other side by least
/// squares over group or chart parameters.
pub fn reconstruct_check(tube: &PartialTube, reference: &OrbitGerm, opts: &HausdorffOptions) -> Result<HausdorffReport> {
    let fam = tube.family();
    let rfam = &reference.family;
    if rfam.kind != fam.kind || rfam.dim_g() != fam.dim_g() {
        return Err(Error::Invalid("reference orbit lives in a different ambient space".into()));
    }
    let n = opts.samples;
    let germ = &tube.germ;
    // Image-tube samples from fresh curves and group elements.
    let sampler = CurveSampler { segments: 3, max_length: 2.0 * PI };
    let curves = if germ.dim() == 0 { vec![OrbitCurve::default(); n] } else { sampler.sample_many(&germ.family, n, rng::derive(opts.seed, 1)) };
    let group = haar_sample(&tube.algebra, n, rng::derive(opts.seed, 2));
    let frames: Vec<(bool, Point, DMatrix<f64>)> = curves
        .par_iter()
        .zip(group.par_iter())
        .map(|(c, g)| {
            let t = normal_parallel_transport(&germ.family, &germ.point, c, &germ.normal, TransportMethod::ClosedForm)?;
            Ok((c.segments.is_empty(), t.end_point().clone(), t.end_frame() * &g.matrix))
        })
        .collect::<Result<_>>()?;
    let tube_pts: Vec<DVector<f64>> =
        frames.iter().map(|(_, q, psi)| fam.embed(&fam.exp_at(q, &(psi * &tube.xi_coords)))).collect();
    // Reference samples.
    let rcurves = sampler.sample_many(rfam, n, rng::derive(opts.seed, 3));
    let rgroup: Vec<DMatrix<f64>> = rcurves.iter().map(|c| c.group_element(rfam)).collect();
    let ref_pts: Vec<DVector<f64>> = rgroup.iter().map(|g| fam.embed(&rfam.act(g, &reference.point))).collect();
    let dh = rfam.dim_h();
    let forward: Vec<f64> = tube_pts
        .par_iter()
        .map(|y| {
            nearest(y, &ref_pts, opts.starts)
                .into_iter()
                .map(|j| {
                    let f = |c: &DVector<f64>| {
                        let z = &rfam.h * c;
                        fam.embed(&rfam.act(&(rfam.space.exp_ad(&z) * &rgroup[j]), &reference.point)) - y
                    };
                    fam.embed_to_metric(fit::least_squares(f, DVector::zeros(dh)).1)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let backward: Vec<f64> = ref_pts
        .par_iter()
        .map(|z| {
            nearest(z, &tube_pts, opts.starts)
                .into_iter()
                .map(|i| {
                    let (at_p, q, psi) = &frames[i];
                    let germ_q = if *at_p { germ.clone() } else { germ.at(q.clone()) };
                    let chart = TubeChart::with_germ(tube, germ_q, psi.clone());
                    let f = |p: &DVector<f64>| fam.embed(&chart.point(p)) - z;
                    fam.embed_to_metric(fit::least_squares(f, DVector::zeros(chart.n_params())).1)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let fwd = forward.into_iter().fold(0.0, f64::max);
    let bwd = backward.into_iter().fold(0.0, f64::max);
    let tube_dim = tube.dim();
    let structural_failure = (tube_dim != reference.dim())
        .then(|| format!("tube dimension {tube_dim} differs from reference dimension {}", reference.dim()));
    let hausdorff_forward = measured(fwd, tol::HAUSDORFF);
    let hausdorff_backward = measured(bwd, tol::HAUSDORFF);
    Ok(HausdorffReport {
        pass: structural_failure.is_none() && hausdorff_forward.pass() && hausdorff_backward.pass(),
        hausdorff_forward,
        hausdorff_backward,
        samples_tube: n,
        samples_reference: n,
        tube_dim,
        reference_dim: reference.dim(),
        structural_failure,
    })
}

/// Machine-readable tube summary.
#[derive(Clone, Debug, Serialize)]
pub struct TubeReport {
    pub xi_norm: f64,
    pub principal: bool,
    pub degenerate: bool,
    pub fibre_dim: usize,
    pub codim: usize,
    pub equifocal: Option<EquifocalReport>,
    pub reconstruction: Option<HausdorffReport>,
}

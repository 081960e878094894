//! Focal analysis of orbit germs through the closed form of the differential
//! of the normal exponential map.
//!
//! With `R_eta = R(., eta) eta` diagonalized on `T_x N` by eigenpairs
//! `(lambda_h, w_h)`, the differential at `eta` (up to parallel transport
//! along the geodesic) is
//!
//! * `D z = sum_h sin_l(1) <z, w_h> w_h` on normal vectors,
//! * `Dbar z = sum_h (cos_l(1) <z, w_h> - sin_l(1) <A_eta z, w_h>) w_h` on
//!   tangent vectors,
//!
//! where `sin_l(1) = sin(sqrt l)/sqrt l` and `cos_l(1) = cos(sqrt l)`, with the
//! hyperbolic branch for negative `l`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::orbits::OrbitGerm;
use crate::rng;
use crate::tol;

pub const SCAN_STEPS: usize = 512;

/// `sin(sqrt l) / sqrt l`, continuous through `l = 0`.
pub fn sin_l(l: f64) -> f64 {
    if l.abs() < 1e-6 {
        1.0 - l / 6.0 + l * l / 120.0
    } else if l > 0.0 {
        let s = l.sqrt();
        s.sin() / s
    } else {
        let s = (-l).sqrt();
        s.sinh() / s
    }
}

/// `cos(sqrt l)`, continuous through `l = 0`.
pub fn cos_l(l: f64) -> f64 {
    if l.abs() < 1e-6 {
        1.0 - l / 2.0 + l * l / 24.0
    } else if l > 0.0 {
        l.sqrt().cos()
    } else {
        (-l).sqrt().cosh()
    }
}

/// The operator `Dbar + D : T_x M + perp_x M -> T_x N` at `eta`.
#[derive(Clone, Debug)]
pub struct NormalExpDifferential {
    pub eta: DVector<f64>,
    /// Jacobi eigenvalues on `T_x N`, ascending.
    pub jacobi_values: Vec<f64>,
    /// Columns: images of the tangent basis, then of the normal basis.
    pub operator: DMatrix<f64>,
    /// Singular values, descending.
    pub singular_values: Vec<f64>,
}

impl NormalExpDifferential {
    pub fn new(germ: &OrbitGerm, eta: &DVector<f64>) -> Result<Self> {
        germ.check_normal(eta)?;
        Ok(Self::unchecked(germ, eta))
    }

    pub(crate) fn unchecked(germ: &OrbitGerm, eta: &DVector<f64>) -> Self {
        let fam = &germ.family;
        let amb = fam.ambient_basis(&germ.point);
        let (vals, vecs) = linalg::sym_eigen(&fam.jacobi_matrix(&amb, eta));
        let w = &amb * vecs;
        let d = w.ncols();
        let mut sin_w = w.clone();
        let mut cos_w = w.clone();
        for h in 0..d {
            sin_w.column_mut(h).scale_mut(sin_l(vals[h]));
            cos_w.column_mut(h).scale_mut(cos_l(vals[h]));
        }
        let s_op = sin_w * w.transpose();
        let c_op = cos_w * w.transpose();
        let a = germ.shape_operator(eta);
        let t = &germ.tangent;
        let dbar = &c_op * t - &s_op * (t * a);
        let dn = &s_op * &germ.normal;
        let mut operator = DMatrix::zeros(germ.dim_g(), germ.dim() + germ.codim());
        operator.columns_mut(0, germ.dim()).copy_from(&dbar);
        operator.columns_mut(germ.dim(), germ.codim()).copy_from(&dn);
        let singular_values = if operator.ncols() == 0 {
            Vec::new()
        } else {
            let mut s = linalg::svd_sorted(&operator).s;
            s.truncate(operator.ncols());
            s
        };
        Self { eta: eta.clone(), jacobi_values: vals, operator, singular_values }
    }

    /// Number of singular values at or below `FOCAL_REL * sigma_max`.
    pub fn kernel_dim(&self) -> usize {
        let max = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values.iter().filter(|&&s| s <= tol::FOCAL_REL * max).count()
    }

    /// `sigma_min / sigma_max`.
    pub fn min_ratio(&self) -> f64 {
        match (self.singular_values.first(), self.singular_values.last()) {
            (Some(&a), Some(&b)) if a > 0.0 => b / a,
            _ => 0.0,
        }
    }

    pub fn min_singular_value(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }
}

pub fn normal_exp_differential(germ: &OrbitGerm, eta: &DVector<f64>) -> Result<NormalExpDifferential> {
    NormalExpDifferential::new(germ, eta)
}

/// Dimension of the kernel of the normal exponential differential at `eta`.
pub fn focal_multiplicity(germ: &OrbitGerm, eta: &DVector<f64>) -> Result<usize> {
    Ok(NormalExpDifferential::new(germ, eta)?.kernel_dim())
}

#[derive(Clone, Debug, Serialize)]
pub struct FocalEvent {
    pub radius: f64,
    pub multiplicity: usize,
    pub min_singular_value: f64,
    /// `sigma_min / sigma_max` at the refined radius.
    pub relative: f64,
}

/// Focal events along the ray `t u`, `0 < t <= scan_limit`.
#[derive(Clone, Debug, Serialize)]
pub struct FocalProfile {
    /// Unit direction in normal coordinates.
    pub direction: Vec<f64>,
    pub scan_limit: f64,
    pub steps: usize,
    pub events: Vec<FocalEvent>,
}

impl FocalProfile {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("radius,multiplicity,min_singular_value\n");
        for e in &self.events {
            s.push_str(&format!("{:.15e},{},{:.6e}\n", e.radius, e.multiplicity, e.min_singular_value));
        }
        s
    }
}

fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if (b - a) <= 1e-14 * b.abs().max(1.0) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        c
    } else {
        d
    }
}

/// Refined ratios between these bounds are treated as ambiguous near-misses.
const AMBIGUOUS_BAND: (f64, f64) = (tol::FOCAL_REL, 1e-6);

/// Refined vanishing minima `(t, ratio(t))` of a relative singular value
/// along `0 < t <= limit`.
///
/// The grid has `SCAN_STEPS` intervals; each discrete local minimum is
/// refined by golden-section search and kept when the refined ratio is at or
/// below `FOCAL_REL`.
pub(crate) fn vanishing_minima<F: Fn(f64) -> f64>(ratio: F, limit: f64, first_only: bool) -> Result<Vec<(f64, f64)>> {
    let dt = limit / SCAN_STEPS as f64;
    let vals: Vec<f64> = (0..=SCAN_STEPS + 1).map(|i| ratio(i as f64 * dt)).collect();
    let mut found: Vec<(f64, f64)> = Vec::new();
    for i in 1..=SCAN_STEPS {
        if !(vals[i] <= vals[i - 1] && vals[i] < vals[i + 1]) {
            continue;
        }
        let t = golden_min(&ratio, (i - 1) as f64 * dt, (i + 1) as f64 * dt);
        if t > limit {
            continue;
        }
        let r = ratio(t);
        if r > AMBIGUOUS_BAND.0 && r <= AMBIGUOUS_BAND.1 {
            return Err(Error::Resolution(format!(
                "near-focal minimum at radius {t:.12} with relative singular value {r:.3e}"
            )));
        }
        if r > tol::FOCAL_REL {
            continue;
        }
        if let Some(&(prev, _)) = found.last() {
            if (t - prev).abs() < 1e-8 {
                return Err(Error::Resolution(format!("focal events at {prev:.12} and {t:.12} closer than 1e-8")));
            }
        }
        found.push((t, r));
        if first_only {
            break;
        }
    }
    Ok(found)
}

fn scan(germ: &OrbitGerm, u: &DVector<f64>, scan_limit: f64, first_only: bool) -> Result<Vec<FocalEvent>> {
    let ratio = |t: f64| NormalExpDifferential::unchecked(germ, &(u * t)).min_ratio();
    let minima = vanishing_minima(ratio, scan_limit, first_only)?;
    Ok(minima
        .into_iter()
        .map(|(t, r)| {
            let d = NormalExpDifferential::unchecked(germ, &(u * t));
            FocalEvent { radius: t, multiplicity: d.kernel_dim(), min_singular_value: d.min_singular_value(), relative: r }
        })
        .collect())
}

/// Scan `t -> t u` over 512 steps and refine each vanishing minimum of the
/// smallest singular value by golden-section search.
pub fn focal_profile(germ: &OrbitGerm, u: &DVector<f64>, scan_limit: f64) -> Result<FocalProfile> {
    germ.check_normal(u)?;
    let n = u.norm();
    if n <= tol::ZERO_ABS {
        return Err(Error::Invalid("focal profile needs a nonzero direction".into()));
    }
    if !(scan_limit > 0.0 && scan_limit.is_finite()) {
        return Err(Error::Invalid("scan limit must be positive and finite".into()));
    }
    let u = u / n;
    let events = scan(germ, &u, scan_limit, false)?;
    Ok(FocalProfile {
        direction: germ.normal_coords(&u).iter().copied().collect(),
        scan_limit,
        steps: SCAN_STEPS,
        events,
    })
}

/// A scan limit that covers the first conjugate radius along `u` and the
/// flat focal radius of the largest principal curvature.
pub fn default_scan_limit(germ: &OrbitGerm, u: &DVector<f64>) -> f64 {
    let u = u / u.norm();
    let amb = germ.family.ambient_basis(&germ.point);
    let (vals, _) = linalg::sym_eigen(&germ.family.jacobi_matrix(&amb, &u));
    let lmax = vals.last().copied().unwrap_or(0.0);
    let (avals, _) = linalg::sym_eigen(&germ.shape_operator(&u));
    let amax = avals.last().copied().unwrap_or(0.0);
    let mut l: f64 = 0.0;
    if lmax > 1e-12 {
        l = l.max(std::f64::consts::PI / lmax.sqrt());
    }
    if amax > 1e-12 {
        l = l.max(1.0 / amax);
    }
    if l == 0.0 {
        f64::INFINITY
    } else {
        1.05 * l
    }
}

/// Half of the smallest first focal radius over a fixed set of sampled
/// normal directions; infinite when no focal point is found.
pub fn estimate_epsilon(germ: &OrbitGerm) -> f64 {
    let k = germ.codim();
    if k == 0 {
        return f64::INFINITY;
    }
    let mut dirs: Vec<DVector<f64>> = Vec::new();
    for j in 0..k {
        let v = germ.normal.column(j).into_owned();
        dirs.push(-&v);
        dirs.push(v);
    }
    if k > 1 {
        let mut r = rng::seeded(0x5eed_e951);
        for _ in 0..16 {
            dirs.push(rng::unit_in_span(&mut r, &germ.normal));
        }
    }
    let mut best = f64::INFINITY;
    for u in &dirs {
        let limit = default_scan_limit(germ, u);
        if !limit.is_finite() {
            continue;
        }
        if let Ok(ev) = scan(germ, u, limit, true) {
            if let Some(e) = ev.first() {
                best = best.min(e.radius);
            }
        }
    }
    0.5 * best
}

#[derive(Clone, Debug, Serialize)]
pub struct FocalProbe {
    /// Probe vector in normal coordinates at the source germ.
    pub eta: Vec<f64>,
    pub multiplicity_source: usize,
    pub multiplicity_image: usize,
    pub relative_singular_image: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FocalPreservation {
    pub probes: Vec<FocalProbe>,
    pub pass: bool,
    pub first_failure: Option<usize>,
}

/// Test whether the map `psi` (normal coordinates at `source` to ambient
/// normal vectors at `image`) carries focal vectors to focal vectors of the
/// same multiplicity.
///
/// Probes are the first two focal radii along random directions plus a
/// non-focal radius below the first.
pub fn preserves_focal_structure(
    source: &OrbitGerm,
    image: &OrbitGerm,
    psi: &DMatrix<f64>,
    n_directions: usize,
    seed: u64,
) -> Result<FocalPreservation> {
    let k = source.codim();
    if psi.shape() != (image.dim_g(), k) || image.codim() != k {
        return Err(Error::Invalid("psi must map the normal space onto the image normal space".into()));
    }
    let mut r = rng::seeded(seed);
    let eye = DMatrix::<f64>::identity(k, k);
    let mut probes = Vec::new();
    for _ in 0..n_directions {
        let c = rng::unit_in_span(&mut r, &eye);
        let u = source.normal_vector(&c);
        let limit = default_scan_limit(source, &u);
        if !limit.is_finite() {
            continue;
        }
        let prof = focal_profile(source, &u, limit)?;
        let mut radii: Vec<f64> = prof.events.iter().take(2).map(|e| e.radius).collect();
        if let Some(&first) = radii.first() {
            radii.push(0.5 * first);
        }
        for t in radii {
            let eta_c = &c * t;
            let src = NormalExpDifferential::new(source, &source.normal_vector(&eta_c))?;
            let img = NormalExpDifferential::new(image, &(psi * &eta_c))?;
            let pass = src.kernel_dim() == img.kernel_dim();
            probes.push(FocalProbe {
                eta: eta_c.iter().copied().collect(),
                multiplicity_source: src.kernel_dim(),
                multiplicity_image: img.kernel_dim(),
                relative_singular_image: img.min_ratio(),
                pass,
            });
        }
    }
    let first_failure = probes.iter().position(|p| !p.pass);
    Ok(FocalPreservation { pass: first_failure.is_none(), probes, first_failure })
}

//! Smooth families of abelian subspaces and the rigidity of subtori.
//!
//! A `d`-plane in the tangent space of a flat torus exponentiates to a
//! subtorus exactly when it is spanned by integer combinations of the lattice.
//! `subtorus_test` decides this from continued-fraction expansions of the
//! row-reduced lattice coordinates with a denominator bound, and reports an
//! inconclusive outcome instead of guessing. `lattice_rigidity_check` is the
//! computational content of the countability argument: a smooth family of
//! such planes is constant. The last two checks concern isometries carrying
//! one normal torus to another: they induce normal parallel transport, and
//! the Killing field of a curve of isometries is normal to a flat torus when
//! it is normal at one point.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::orbits::{normal_parallel_transport, OrbitCurve, OrbitGerm, Segment, TransportMethod};
use crate::rng;
use crate::symspace::SymmetricSpace;
use crate::tol::{self, Measured};

/// Default denominator bound of the integer relation search.
pub const DENOMINATOR_BOUND: i64 = 1_000_000;
/// A convergent within this distance of `x` (relative to `max(1, |x|)`)
/// explains `x` up to rounding in the row reduction.
const MATCH_TOL: f64 = 1e-14;
/// A match with `q^2 |x - p/q|` at or below this certifies `x = p/q`: an
/// irrational matched this closely would need a partial quotient above a
/// thousand right after `p/q`.
const RATIONAL_FACTOR: f64 = 1e-3;
/// Relative pivot threshold in the row reduction.
const PIVOT_REL: f64 = 1e-9;
/// Largest principal angle for a family to count as constant.
pub const RIGIDITY_ANGLE: f64 = 1e-8;
/// Pass bound of the isometry transport check.
pub const TRANSPORT_MATCH: f64 = 1e-5;
/// Mapping precondition of the isometry transport check.
pub const NORMAL_MAPPING: f64 = 1e-6;
/// Bound on the tangential part of an induced Killing field.
pub const KILLING_NORMAL: f64 = 1e-6;

/// Outcome of a continued-fraction expansion below the denominator bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum RationalFit {
    /// `x = p/q` up to rounding.
    Rational { p: i64, q: i64 },
    /// No convergent with `q` within the bound comes within the match
    /// tolerance; `p/q` is the last one tried.
    Irrational { p: i64, q: i64, error: f64 },
    /// `p/q` matches within tolerance, but so closely only because `q` is
    /// large: rounding cannot separate it from an irrational number.
    Inconclusive { p: i64, q: i64, error: f64 },
}

/// Decide whether `x` is a fraction with denominator at most `bound`.
pub fn rational_fit(x: f64, bound: i64) -> RationalFit {
    rational_fit_within(x, bound, MATCH_TOL)
}

/// `rational_fit` with a match tolerance `tol` relative to `max(1, |x|)`,
/// for inputs carrying more rounding than a plain literal.
pub fn rational_fit_within(x: f64, bound: i64, tol: f64) -> RationalFit {
    let tol = tol * x.abs().max(1.0);
    let (mut p0, mut q0, mut p1, mut q1) = (1i64, 0i64, x.floor() as i64, 1i64);
    let mut rem = x - x.floor();
    loop {
        let error = (x - p1 as f64 / q1 as f64).abs();
        if error <= tol {
            return if (q1 as f64).powi(2) * error <= RATIONAL_FACTOR {
                RationalFit::Rational { p: p1, q: q1 }
            } else {
                RationalFit::Inconclusive { p: p1, q: q1, error }
            };
        }
        let stop = RationalFit::Irrational { p: p1, q: q1, error };
        if rem <= f64::EPSILON {
            return stop;
        }
        let inv = 1.0 / rem;
        let a = inv.floor();
        rem = inv - a;
        let a = a as i64;
        let next = (a.checked_mul(p1).and_then(|v| v.checked_add(p0)), a.checked_mul(q1).and_then(|v| v.checked_add(q0)));
        match next {
            (Some(p2), Some(q2)) if q2 <= bound => (p0, q0, p1, q1) = (p1, q1, p2, q2),
            _ => return stop,
        }
    }
}

/// Reduced row echelon form with partial pivoting; returns the pivot columns.
pub fn rref(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<usize>) {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (best, val) = (r..rows).map(|i| (i, a[(i, c)].abs())).fold((r, -1.0), |x, y| if y.1 > x.1 { y } else { x });
        if val <= PIVOT_REL * scale {
            continue;
        }
        a.swap_rows(r, best);
        let pv = a[(r, c)];
        for j in 0..cols {
            a[(r, j)] /= pv;
        }
        for i in 0..rows {
            if i != r {
                let f = a[(i, c)];
                if f != 0.0 {
                    for j in 0..cols {
                        a[(i, j)] -= f * a[(r, j)];
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (a, pivots)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SubtorusVerdict {
    Subtorus,
    NotSubtorus,
    Inconclusive,
}

/// Entry of the row-reduced coordinates that decided a negative or
/// inconclusive outcome.
#[derive(Clone, Debug, Serialize)]
pub struct RationalWitness {
    pub row: usize,
    pub col: usize,
    pub value: f64,
    pub fit: RationalFit,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubtorusResult {
    pub verdict: SubtorusVerdict,
    /// Integer lattice coordinates of a spanning set, one vector per row.
    pub rational_basis: Option<Vec<Vec<i64>>>,
    /// The same spanning set in ambient coordinates (columns).
    #[serde(skip)]
    pub lattice_vectors: Option<DMatrix<f64>>,
    pub witness: Option<RationalWitness>,
    /// Largest principal angle between the plane and the span of the
    /// integer basis.
    pub span_residual: f64,
    pub denominator_bound: i64,
    /// Relative distance within which a convergent matched an entry.
    pub match_tolerance: f64,
    pub common_denominator: CommonDenominator,
}

/// Simultaneous search for one denominator clearing every row-reduced
/// entry, run when single entries are inconclusive. The reduced coordinates
/// of a rational plane share a common denominator, so its absence up to the
/// bound rules the plane out even when each entry alone is undecided.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CommonDenominator {
    NotSearched,
    /// Smallest `D` with every `D x` within rounding of an integer.
    Found(i64),
    /// No `D` up to the bound clears all entries.
    Absent,
}

impl SubtorusResult {
    pub fn is_subtorus(&self) -> bool {
        self.verdict == SubtorusVerdict::Subtorus
    }
}

/// Smallest `D <= bound` making every entry of `m` an integer up to the
/// relative tolerance `tol`, entries farthest from an integer tested first.
fn common_denominator_search(m: &DMatrix<f64>, bound: i64, tol: f64) -> CommonDenominator {
    let mut entries: Vec<(f64, f64)> = m.iter().map(|&x| (x, tol * x.abs().max(1.0))).collect();
    entries.sort_by(|a, b| (b.0 - b.0.round()).abs().total_cmp(&(a.0 - a.0.round()).abs()));
    for d in 1..=bound {
        let df = d as f64;
        if entries.iter().all(|&(x, t)| {
            let y = df * x;
            (y - y.round()).abs() <= df * t
        }) {
            return CommonDenominator::Found(d);
        }
    }
    CommonDenominator::Absent
}

fn condition(m: &DMatrix<f64>) -> f64 {
    let s = linalg::svd_sorted(m).s;
    let n = m.nrows().min(m.ncols());
    s[0] / s[n - 1]
}

fn check_lattice(lattice: &DMatrix<f64>) -> Result<()> {
    let l = lattice.ncols();
    if l == 0 || lattice.nrows() < l {
        return Err(Error::NotLattice(format!("{l} vectors in dimension {}", lattice.nrows())));
    }
    let r = linalg::rank(lattice);
    if r < l {
        return Err(Error::NotLattice(format!("the {l} basis vectors span only dimension {r}")));
    }
    Ok(())
}

/// Decide whether the span of the columns of `subspace` is spanned by
/// integer combinations of the columns of `lattice`.
pub fn subtorus_test(lattice: &DMatrix<f64>, subspace: &DMatrix<f64>, bound: i64) -> Result<SubtorusResult> {
    check_lattice(lattice)?;
    if subspace.nrows() != lattice.nrows() {
        return Err(Error::Invalid(format!(
            "subspace vectors have length {} but lattice vectors have length {}",
            subspace.nrows(),
            lattice.nrows()
        )));
    }
    let plane = linalg::orthonormal_span(subspace);
    let d = plane.ncols();
    let l = lattice.ncols();
    // Independent spanning columns of the input, kept unrotated so integer
    // structure is not mixed with the rounding of an orthonormalization.
    let mut chosen: Vec<DVector<f64>> = Vec::new();
    for j in 0..subspace.ncols() {
        let mut trial = chosen.clone();
        trial.push(subspace.column(j).into_owned());
        if linalg::rank(&linalg::columns(subspace.nrows(), &trial)) == trial.len() {
            chosen = trial;
        }
    }
    // Lattice coordinates, one spanning vector per row.
    let rows = DMatrix::from_rows(
        &chosen.iter().map(|v| linalg::lstsq(lattice, v).transpose()).collect::<Vec<_>>(),
    );
    let span_in = linalg::columns(subspace.nrows(), &chosen);
    let off = (lattice * rows.transpose() - &span_in).norm() / span_in.norm().max(f64::MIN_POSITIVE);
    if off > tol::MEMBERSHIP {
        return Err(Error::NotInSubspace { space: "the span of the lattice", residual: off });
    }
    let (red, pivots) = rref(&rows);
    let reduced = red.rows(0, pivots.len()).into_owned();
    // Rounding carried into the reduced entries grows with the conditioning
    // of the lattice and of the pivot block.
    let pivot_block = DMatrix::from_fn(d, d, |i, j| rows[(i, pivots[j])]);
    let match_tol = MATCH_TOL.max(16.0 * f64::EPSILON * condition(lattice) * condition(&pivot_block));
    let mut witness: Option<RationalWitness> = None;
    let mut fractions = vec![vec![(0i64, 1i64); l]; d];
    for i in 0..d {
        for j in 0..l {
            let x = reduced[(i, j)];
            let fit = rational_fit_within(x, bound, match_tol);
            match fit {
                RationalFit::Rational { p, q } => fractions[i][j] = (p, q),
                RationalFit::Irrational { .. } => {
                    if !matches!(witness.as_ref().map(|w| w.fit), Some(RationalFit::Irrational { .. })) {
                        witness = Some(RationalWitness { row: i, col: j, value: x, fit });
                    }
                }
                RationalFit::Inconclusive { .. } => {
                    if witness.is_none() {
                        witness = Some(RationalWitness { row: i, col: j, value: x, fit });
                    }
                }
            }
        }
    }
    let mut common_denominator = CommonDenominator::NotSearched;
    let verdict = match witness.as_ref().map(|w| w.fit) {
        None => SubtorusVerdict::Subtorus,
        Some(RationalFit::Irrational { .. }) => SubtorusVerdict::NotSubtorus,
        Some(_) => {
            common_denominator = common_denominator_search(&reduced, bound, match_tol);
            if common_denominator == CommonDenominator::Absent {
                SubtorusVerdict::NotSubtorus
            } else {
                SubtorusVerdict::Inconclusive
            }
        }
    };
    let mut result = SubtorusResult {
        verdict,
        rational_basis: None,
        lattice_vectors: None,
        witness,
        span_residual: f64::NAN,
        denominator_bound: bound,
        match_tolerance: match_tol,
        common_denominator,
    };
    if verdict != SubtorusVerdict::Subtorus {
        return Ok(result);
    }
    let rows: Vec<Vec<i64>> = fractions
        .iter()
        .map(|row| {
            let den = row.iter().fold(1i64, |acc, &(_, q)| acc / linalg::gcd(acc, q) * q);
            let ints: Vec<i64> = row.iter().map(|&(p, q)| p * (den / q)).collect();
            let g = ints.iter().fold(0i64, |acc, &v| linalg::gcd(acc, v)).max(1);
            ints.into_iter().map(|v| v / g).collect()
        })
        .collect();
    let cols: Vec<DVector<f64>> = rows
        .iter()
        .map(|r| lattice * DVector::from_iterator(l, r.iter().map(|&v| v as f64)))
        .collect();
    let vectors = linalg::columns(lattice.nrows(), &cols);
    let span = linalg::orthonormal_span(&vectors);
    result.span_residual = linalg::subspace_distance(&plane, &span);
    if span.ncols() != d || result.span_residual > 1e-8 {
        return Err(Error::Consistency(format!(
            "integer basis spans a different plane (angle {:.3e})",
            result.span_residual
        )));
    }
    result.rational_basis = Some(rows);
    result.lattice_vectors = Some(vectors);
    Ok(result)
}

/// A sampled smooth family `E(t)` of `d`-planes with a moving orthonormal
/// basis `v_1(t), ..., v_d(t)`.
#[derive(Clone, Debug)]
pub struct TorusFamily {
    pub times: Vec<f64>,
    /// Moving bases, aligned so that consecutive bases differ by `O(step)`.
    pub bases: Vec<DMatrix<f64>>,
    /// Largest bracket norm between basis vectors of one plane, when the
    /// planes live in `p` of a symmetric space.
    pub abelian_residual: Option<f64>,
}

impl TorusFamily {
    /// Orthonormalize each plane and align it to its predecessor by the
    /// orthogonal Procrustes rotation. With `space`, the planes are `p`
    /// vectors in adapted coordinates and must be abelian.
    pub fn new(times: Vec<f64>, planes: &[DMatrix<f64>], space: Option<&SymmetricSpace>) -> Result<Self> {
        if times.len() != planes.len() || times.is_empty() {
            return Err(Error::Invalid("one plane per sample time is required".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("sample times must increase".into()));
        }
        let mut bases: Vec<DMatrix<f64>> = Vec::with_capacity(planes.len());
        for p in planes {
            let mut b = linalg::orthonormal_span(p);
            if let Some(prev) = bases.last() {
                if b.ncols() != prev.ncols() {
                    return Err(Error::Invalid(format!("plane dimension changes from {} to {}", prev.ncols(), b.ncols())));
                }
                let svd = linalg::svd_sorted(&(b.transpose() * prev));
                b = &b * (&svd.u * svd.v.transpose());
            }
            bases.push(b);
        }
        let abelian_residual = match space {
            None => None,
            Some(sp) => {
                let mut worst: f64 = 0.0;
                for b in &bases {
                    for i in 0..b.ncols() {
                        for j in i + 1..b.ncols() {
                            worst = worst.max(sp.bracket(&b.column(i).into_owned(), &b.column(j).into_owned()).norm());
                        }
                    }
                }
                if worst > tol::ABELIAN {
                    return Err(Error::Precondition(format!("a plane of the family is not abelian: bracket {worst:.3e}")));
                }
                Some(worst)
            }
        };
        Ok(Self { times, bases, abelian_residual })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bases[0].ncols()
    }

    /// `psi_{t_i}^{t_j}: E(t_j) -> E(t_i)`, `v_k(t_j) -> v_k(t_i)`, as a map of
    /// the ambient space vanishing on the complement of `E(t_j)`.
    pub fn comparison_isometry(&self, i: usize, j: usize) -> DMatrix<f64> {
        &self.bases[i] * self.bases[j].transpose()
    }

    /// Deviation of `psi` from an isometry `E(t_j) -> E(t_i)`.
    pub fn isometry_residual(&self, i: usize, j: usize) -> f64 {
        let m = self.comparison_isometry(i, j) * &self.bases[j];
        let d = self.dim();
        (m.transpose() * &m - DMatrix::<f64>::identity(d, d)).norm()
    }

    /// Largest principal angle between consecutive planes over the step.
    pub fn max_rate(&self) -> f64 {
        (1..self.len())
            .map(|i| linalg::subspace_distance(&self.bases[i - 1], &self.bases[i]) / (self.times[i] - self.times[i - 1]))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RigidityOptions {
    pub denominator_bound: i64,
    /// Largest admissible rate of change (radians per unit time) between
    /// consecutive samples; faster jumps mean the family is not sampled as a
    /// smooth curve.
    pub lipschitz: f64,
}

impl Default for RigidityOptions {
    fn default() -> Self {
        Self { denominator_bound: DENOMINATOR_BOUND, lipschitz: 10.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RigidityReport {
    pub samples: usize,
    /// Largest principal angle between `E(t)` and `E(t_0)`.
    pub max_angle: Measured,
    pub max_rate: f64,
    pub constant: bool,
}

/// Check that a smooth family of subtorus planes is constant.
pub fn lattice_rigidity_check(lattice: &DMatrix<f64>, family: &TorusFamily, opts: &RigidityOptions) -> Result<RigidityReport> {
    let rate = family.max_rate();
    if rate > opts.lipschitz {
        return Err(Error::NotSmooth(format!(
            "consecutive planes turn at rate {rate:.3e} above the bound {:.3e}; the rigidity check does not apply",
            opts.lipschitz
        )));
    }
    for (i, b) in family.bases.iter().enumerate() {
        let r = subtorus_test(lattice, b, opts.denominator_bound)?;
        if !r.is_subtorus() {
            return Err(Error::Precondition(format!(
                "the plane at t = {} is not certified as a subtorus ({:?})",
                family.times[i], r.verdict
            )));
        }
    }
    let angle = family.bases.iter().map(|b| linalg::subspace_distance(&family.bases[0], b)).fold(0.0, f64::max);
    let max_angle = Measured::new(angle, RIGIDITY_ANGLE);
    Ok(RigidityReport { samples: family.len(), constant: max_angle.pass(), max_angle, max_rate: rate })
}

/// The first `u` units of arclength of `curve`.
pub fn truncate_curve(curve: &OrbitCurve, u: f64) -> OrbitCurve {
    let mut left = u;
    let mut segments = Vec::new();
    for s in &curve.segments {
        if left <= 0.0 {
            break;
        }
        let len = s.length.min(left);
        segments.push(Segment { generator: s.generator.clone(), length: len });
        left -= len;
    }
    OrbitCurve::new(segments)
}

fn curve_length(curve: &OrbitCurve) -> f64 {
    curve.segments.iter().map(|s| s.length).sum()
}

#[derive(Clone, Copy, Debug)]
pub struct TransportCheckOptions {
    /// Checkpoints along the curve, the endpoint included.
    pub checkpoints: usize,
    pub ode_step: f64,
}

impl Default for TransportCheckOptions {
    fn default() -> Self {
        Self { checkpoints: 8, ode_step: 0.01 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TransportCheck {
    /// Largest `|g(t)_* v - (transport) v|` over the normal basis and the
    /// checkpoints.
    pub residual: Measured,
    /// Largest failure of `g(t)_*` to map the normal space onto the normal
    /// space at `c(t)`.
    pub mapping_residual: f64,
    pub checkpoints: usize,
    pub ode_step: f64,
    pub pass: bool,
}

/// Compare `g(t)_*` with the ODE normal transport along `curve`. `g` returns
/// the adjoint matrix of the isometry after `t` units of arclength.
pub fn isometry_transport_check<G>(germ: &OrbitGerm, curve: &OrbitCurve, g: G, opts: &TransportCheckOptions) -> Result<TransportCheck>
where
    G: Fn(f64) -> DMatrix<f64>,
{
    let fam = &germ.family;
    let n = germ.dim_g();
    let g0 = g(0.0);
    let id = (&g0 - DMatrix::<f64>::identity(n, n)).norm();
    if id > tol::ORTHOGONAL {
        return Err(Error::Invalid(format!("g(0) differs from the identity by {id:.3e}")));
    }
    let total = curve_length(curve);
    let count = opts.checkpoints.max(1);
    let mut mapping: f64 = 0.0;
    let mut residual: f64 = 0.0;
    for k in 1..=count {
        let u = total * k as f64 / count as f64;
        let part = truncate_curve(curve, u);
        let gu = g(u);
        let q = part.end_point(fam, &germ.point);
        let moved = fam.act(&gu, &germ.point);
        let nq = fam.normal_basis(&q);
        let image = &gu * &germ.normal;
        let off = (&image - &nq * (nq.transpose() * &image)).norm();
        let gap = fam.distance(&moved, &q);
        mapping = mapping.max(off).max(gap);
        if mapping > NORMAL_MAPPING {
            return Err(Error::NotInSubspace { space: "the normal space along the curve", residual: mapping });
        }
        let t = normal_parallel_transport(fam, &germ.point, &part, &germ.normal, TransportMethod::Ode { step: opts.ode_step })?;
        residual = residual.max((&image - t.end_frame()).norm());
    }
    let residual = Measured::new(residual, TRANSPORT_MATCH);
    Ok(TransportCheck { pass: residual.pass(), residual, mapping_residual: mapping, checkpoints: count, ode_step: opts.ode_step })
}

/// Residuals of `isometry_transport_check` at steps `h` and `h/2` with the
/// observed order `log2(r_h / r_{h/2})`.
#[derive(Clone, Debug, Serialize)]
pub struct TransportConvergence {
    pub coarse: f64,
    pub fine: f64,
    pub order: f64,
}

pub fn transport_convergence<G>(germ: &OrbitGerm, curve: &OrbitCurve, g: G, step: f64) -> Result<TransportConvergence>
where
    G: Fn(f64) -> DMatrix<f64>,
{
    let coarse = isometry_transport_check(germ, curve, &g, &TransportCheckOptions { checkpoints: 1, ode_step: step })?.residual.value;
    let fine = isometry_transport_check(germ, curve, &g, &TransportCheckOptions { checkpoints: 1, ode_step: step / 2.0 })?.residual.value;
    Ok(TransportConvergence { coarse, fine, order: (coarse / fine).log2() })
}

#[derive(Clone, Debug, Serialize)]
pub struct KillingNormality {
    /// Tangential part at the base point, required to vanish.
    pub base_tangential: f64,
    /// Largest tangential part over the sampled torus points.
    pub max_tangential: Measured,
    pub samples: usize,
    pub pass: bool,
}

/// Killing field of `z` (adapted coordinates of `g`) along the flat torus
/// `exp(E)` through the base point, projected onto the torus.
///
/// The torus is totally geodesic and abelian, so its tangent space at
/// `exp(a)` is `E` itself: `Ad(exp a)` fixes `E` pointwise.
pub fn killing_normality(space: &SymmetricSpace, flat: &DMatrix<f64>, z: &DVector<f64>, samples: usize, seed: u64) -> Result<KillingNormality> {
    let e = linalg::orthonormal_span(flat);
    let k = space.dim_k();
    if e.rows(0, k).norm() > tol::MEMBERSHIP {
        return Err(Error::NotInSubspace { space: "p", residual: e.rows(0, k).norm() });
    }
    let mut br: f64 = 0.0;
    for i in 0..e.ncols() {
        for j in i + 1..e.ncols() {
            br = br.max(space.bracket(&e.column(i).into_owned(), &e.column(j).into_owned()).norm());
        }
    }
    if br > tol::ABELIAN {
        return Err(Error::Precondition(format!("the plane is not abelian: bracket {br:.3e}")));
    }
    let pe = linalg::projector(&e);
    let killing = |q: &crate::symspace::SymPoint| (z - &q.theta * z) * 0.5;
    let p = space.base_point();
    let base_tangential = (&pe * killing(&p)).norm();
    if base_tangential > tol::MEMBERSHIP * z.norm().max(1.0) {
        return Err(Error::Precondition(format!(
            "the Killing field is not normal to the torus at the base point: tangential part {base_tangential:.3e}"
        )));
    }
    let mut r = rng::seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let c = DVector::from_fn(e.ncols(), |_, _| r.random_range(-std::f64::consts::PI..std::f64::consts::PI));
        let q = space.exp_at(&p, &(&e * c));
        worst = worst.max((&pe * killing(&q)).norm());
    }
    let max_tangential = Measured::new(worst, KILLING_NORMAL);
    Ok(KillingNormality { base_tangential, pass: max_tangential.pass(), max_tangential, samples })
}

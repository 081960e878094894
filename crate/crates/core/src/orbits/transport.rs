use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use super::{OrbitFamily, OrbitGerm, Point};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{self, Rng};
use crate::tol;

/// Flow for time `length` along the one-parameter subgroup of `generator`.
#[derive(Clone, Debug)]
pub struct Segment {
    pub generator: DVector<f64>,
    pub length: f64,
}

/// Piecewise curve `t -> exp(t Z_k) ... exp(L_1 Z_1) x`.
#[derive(Clone, Debug, Default)]
pub struct OrbitCurve {
    pub segments: Vec<Segment>,
}

impl OrbitCurve {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self { segments }
    }

    /// Adjoint matrix of the group element moving the start to the end.
    pub fn group_element(&self, fam: &OrbitFamily) -> DMatrix<f64> {
        let n = fam.dim_g();
        let mut g = DMatrix::identity(n, n);
        for s in &self.segments {
            g = fam.space.exp_ad(&(&s.generator * s.length)) * g;
        }
        g
    }

    pub fn end_point(&self, fam: &OrbitFamily, x: &Point) -> Point {
        fam.act(&self.group_element(fam), x)
    }

    /// The same curve traversed backwards.
    pub fn reversed(&self) -> Self {
        Self {
            segments: self
                .segments
                .iter()
                .rev()
                .map(|s| Segment { generator: -&s.generator, length: s.length })
                .collect(),
        }
    }

    pub fn then(&self, other: &Self) -> Self {
        let mut segments = self.segments.clone();
        segments.extend(other.segments.iter().cloned());
        Self { segments }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TransportMethod {
    /// Exact formula for segments generated by elements of `h`.
    ClosedForm,
    /// RK4 on `V' = P'(t) V` with the normal projector recomputed along the
    /// curve.
    Ode { step: f64 },
}

/// Result of transporting a set of normal vectors along a curve.
#[derive(Clone, Debug)]
pub struct TransportedFrame {
    pub points: Vec<Point>,
    /// Transported vectors (columns) at each entry of `points`.
    pub frames: Vec<DMatrix<f64>>,
    pub method: TransportMethod,
    /// Largest relative change of a column norm.
    pub drift: f64,
}

impl TransportedFrame {
    pub fn end_point(&self) -> &Point {
        self.points.last().expect("non-empty")
    }

    pub fn end_frame(&self) -> &DMatrix<f64> {
        self.frames.last().expect("non-empty")
    }
}

/// Normal transport along one `h` segment: `Ad(e^{tZ}) exp(-t P ad_Z P)`
/// with `P` the normal projector at the start.
pub fn segment_map(fam: &OrbitFamily, x: &Point, z: &DVector<f64>, t: f64) -> DMatrix<f64> {
    let p = fam.normal_projector(x);
    let m = &p * fam.space.ad(z) * &p;
    fam.space.exp_ad(&(z * t)) * linalg::expm(&(m * -t))
}

fn column_drift(v0: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let mut d: f64 = 0.0;
    for j in 0..v0.ncols() {
        let n0 = v0.column(j).norm();
        if n0 > 0.0 {
            d = d.max((v.column(j).norm() - n0).abs() / n0);
        }
    }
    d
}

/// Normal parallel transport of the columns of `v` (normal at `x`).
pub fn normal_parallel_transport(
    fam: &OrbitFamily,
    x: &Point,
    curve: &OrbitCurve,
    v: &DMatrix<f64>,
    method: TransportMethod,
) -> Result<TransportedFrame> {
    let normal = fam.normal_basis(x);
    let r = (v - &normal * (normal.transpose() * v)).norm();
    if r > tol::MEMBERSHIP * v.norm().max(1.0) {
        return Err(Error::NotInSubspace { space: "the normal space", residual: r });
    }
    match method {
        TransportMethod::ClosedForm => closed_form(fam, x, curve, v),
        TransportMethod::Ode { step } => ode(fam, x, curve, v, step, normal.ncols()),
    }
}

fn closed_form(fam: &OrbitFamily, x: &Point, curve: &OrbitCurve, v: &DMatrix<f64>) -> Result<TransportedFrame> {
    let mut points = vec![x.clone()];
    let mut frames = vec![v.clone()];
    let mut cur = x.clone();
    let mut vec = v.clone();
    for s in &curve.segments {
        fam.check_in_h(&s.generator)?;
        vec = segment_map(fam, &cur, &s.generator, s.length) * vec;
        cur = fam.act(&fam.space.exp_ad(&(&s.generator * s.length)), &cur);
        points.push(cur.clone());
        frames.push(vec.clone());
    }
    let drift = column_drift(v, &vec);
    Ok(TransportedFrame { points, frames, method: TransportMethod::ClosedForm, drift })
}

const FD_DELTA: f64 = 1e-3;

fn ode(
    fam: &OrbitFamily,
    x: &Point,
    curve: &OrbitCurve,
    v: &DMatrix<f64>,
    step: f64,
    codim: usize,
) -> Result<TransportedFrame> {
    if !(step > 0.0) {
        return Err(Error::Invalid("ODE step must be positive".into()));
    }
    let mut points = vec![x.clone()];
    let mut frames = vec![v.clone()];
    let mut start = x.clone();
    let mut vec = v.clone();
    let mut drift: f64 = 0.0;
    for seg in &curve.segments {
        let z = &seg.generator;
        let at = |s: f64| fam.act(&fam.space.exp_ad(&(z * s)), &start);
        let proj = |s: f64| -> Result<DMatrix<f64>> {
            let nb = fam.normal_basis(&at(s));
            if nb.ncols() != codim {
                return Err(Error::StratumChange { from: codim, to: nb.ncols() });
            }
            Ok(linalg::projector(&nb))
        };
        let pdot = |s: f64| -> Result<DMatrix<f64>> {
            let d = FD_DELTA;
            Ok((proj(s - 2.0 * d)? - proj(s + 2.0 * d)? + (proj(s + d)? - proj(s - d)?) * 8.0) / (12.0 * d))
        };
        let steps = (seg.length.abs() / step).ceil().max(1.0) as usize;
        let h = seg.length / steps as f64;
        for i in 0..steps {
            let s = i as f64 * h;
            let k1 = pdot(s)? * &vec;
            let mid = pdot(s + h / 2.0)?;
            let k2 = &mid * (&vec + &k1 * (h / 2.0));
            let k3 = &mid * (&vec + &k2 * (h / 2.0));
            let k4 = pdot(s + h)? * (&vec + &k3 * h);
            vec += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            // The stencil never samples the grid point itself.
            proj(s + h)?;
            points.push(at(s + h));
            frames.push(vec.clone());
        }
        drift = drift.max(column_drift(v, &vec));
        start = fam.act(&fam.space.exp_ad(&(z * seg.length)), &start);
    }
    if drift > tol::TRANSPORT_DRIFT {
        return Err(Error::Accuracy { what: "normal transport norm", drift, suggested_step: step / 4.0 });
    }
    Ok(TransportedFrame { points, frames, method: TransportMethod::Ode { step }, drift })
}

/// Closed loop through `x` built from `h` segments:
/// `x -> a.x -> b.a.x -> b.x -> x` with `a = exp(s Z_a)`, `b = exp(s Z_b)`.
pub fn commutator_loop(fam: &OrbitFamily, za: &DVector<f64>, zb: &DVector<f64>, s: f64) -> OrbitCurve {
    let back = -(fam.space.exp_ad(&(zb * s)) * za);
    OrbitCurve::new(vec![
        Segment { generator: za.clone(), length: s },
        Segment { generator: zb.clone(), length: s },
        Segment { generator: back, length: s },
        Segment { generator: -zb, length: s },
    ])
}

/// Holonomy of a closed curve at the germ point, in the normal basis.
pub fn loop_holonomy(germ: &OrbitGerm, curve: &OrbitCurve, method: TransportMethod) -> Result<DMatrix<f64>> {
    let t = normal_parallel_transport(&germ.family, &germ.point, curve, &germ.normal, method)?;
    if t.drift > tol::TRANSPORT_DRIFT {
        return Err(Error::Accuracy { what: "loop transport norm", drift: t.drift, suggested_step: 0.0 });
    }
    let end = germ.family.distance(t.end_point(), &germ.point);
    if end > 1e-8 {
        return Err(Error::Invalid(format!("curve does not close: gap {end:.3e}")));
    }
    Ok(germ.normal.transpose() * t.end_frame())
}

/// Transport `eta` (normal at the germ point, shorter than `epsilon`) along
/// each curve and return endpoint with transported vector.
pub fn holonomy_tube_sample(
    germ: &OrbitGerm,
    eta: &DVector<f64>,
    curves: &[OrbitCurve],
    method: TransportMethod,
) -> Result<Vec<(Point, DVector<f64>)>> {
    germ.check_normal(eta)?;
    if eta.norm() >= germ.epsilon {
        return Err(Error::TubeRadius { radius: eta.norm(), bound: germ.epsilon });
    }
    if curves.is_empty() {
        return Ok(vec![(germ.point.clone(), eta.clone())]);
    }
    let v = DMatrix::from_column_slice(eta.len(), 1, eta.as_slice());
    curves
        .iter()
        .map(|c| {
            let t = normal_parallel_transport(&germ.family, &germ.point, c, &v, method)?;
            Ok((t.end_point().clone(), t.end_frame().column(0).into_owned()))
        })
        .collect()
}

/// Random piecewise curves generated by unit elements of `h`.
#[derive(Clone, Copy, Debug)]
pub struct CurveSampler {
    pub segments: usize,
    pub max_length: f64,
}

impl Default for CurveSampler {
    fn default() -> Self {
        Self { segments: 2, max_length: 2.0 }
    }
}

impl CurveSampler {
    pub fn sample(&self, fam: &OrbitFamily, rng: &mut Rng) -> OrbitCurve {
        let segs = (0..self.segments)
            .map(|_| Segment {
                generator: rng::unit_in_span(rng, &fam.h),
                length: rng.random_range(0.0..self.max_length),
            })
            .collect();
        OrbitCurve::new(segs)
    }

    pub fn sample_many(&self, fam: &OrbitFamily, count: usize, seed: u64) -> Vec<OrbitCurve> {
        let mut r = rng::seeded(seed);
        (0..count).map(|_| self.sample(fam, &mut r)).collect()
    }
}

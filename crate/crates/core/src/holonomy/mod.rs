//! Holonomy data attached to an orbit germ.
//!
//! The projected ambient curvature on the normal space, its transports along
//! sampled curves and the Lie algebra they generate (`L_p`), the splitting of
//! the normal space into the kernel `V_0` and irreducible blocks, averaging of
//! curvature tensors over a group, and the assembled algebra of `hat G_p`.

mod decompose;
mod tensor;

pub use decompose::{commutant, invariant_decomposition, InvariantDecomposition, DECOMPOSITION_RETRIES};
pub use tensor::{transport_tensor, AlgebraicCurvatureTensor, TensorResiduals, TransportedTensorSet};

use nalgebra::DMatrix;
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::{extend_closure, haar_sample, lie_closure, MatrixLieAlgebra};
use crate::linalg;
use crate::orbits::{
    commutator_loop, loop_holonomy, normal_parallel_transport, CurveSampler, OrbitFamily, OrbitGerm,
    Point, TransportMethod,
};
use crate::rng;

/// Which construction produced an algebra of skew endomorphisms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Provenance {
    /// Generated by transported projected curvature tensors.
    CurvatureClosure,
    /// Generated by a single curvature tensor.
    TensorAlgebra,
    /// Sampled restricted normal holonomy.
    NormalHolonomy,
    /// Curvature closure together with normal holonomy on the kernel.
    HatG,
}

/// A subalgebra of `so(normal space)` with a record of its origin.
#[derive(Clone, Debug)]
pub struct CurvatureEndoAlgebra {
    pub provenance: Provenance,
    pub algebra: MatrixLieAlgebra,
}

impl CurvatureEndoAlgebra {
    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    pub fn space_dim(&self) -> usize {
        self.algebra.space_dim
    }

    pub fn basis(&self) -> &[DMatrix<f64>] {
        &self.algebra.basis
    }

    /// Largest component of a basis bracket outside the algebra.
    pub fn closure_residual(&self) -> f64 {
        let b = &self.algebra.basis;
        let mut worst: f64 = 0.0;
        for i in 0..b.len() {
            for j in i + 1..b.len() {
                let c = linalg::commutator(&b[i], &b[j]);
                worst = worst.max(self.algebra.residual(&c).norm());
            }
        }
        worst
    }

    pub fn skew_residual(&self) -> f64 {
        self.algebra.basis.iter().map(linalg::skew_residual).fold(0.0, f64::max)
    }
}

/// Curvature tensor `<R(n_x, n_y) n_z, n_w>` of the ambient on the
/// orthonormal columns `n`.
pub fn curvature_on(family: &OrbitFamily, n: &DMatrix<f64>) -> AlgebraicCurvatureTensor {
    let k = n.ncols();
    let cols: Vec<_> = (0..k).map(|i| n.column(i).into_owned()).collect();
    let mut r = vec![vec![vec![0.0; k]; k * k]; k];
    for x in 0..k {
        for y in 0..k {
            if x == y {
                continue;
            }
            for z in 0..k {
                let v = family.curvature(&cols[x], &cols[y], &cols[z]);
                let c = n.transpose() * v;
                r[x][y * k + z] = c.as_slice().to_vec();
            }
        }
    }
    AlgebraicCurvatureTensor::from_fn(k, |x, y, z, w| if x == y { 0.0 } else { r[x][y * k + z][w] })
}

/// Projection of the ambient curvature onto the normal space at the germ
/// point, in the germ's normal basis.
pub fn project_curvature(germ: &OrbitGerm) -> AlgebraicCurvatureTensor {
    curvature_on(&germ.family, &germ.normal)
}

/// Sampling parameters shared by the holonomy constructions.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HolonomyOptions {
    #[serde(skip)]
    pub sampler: CurveSampler,
    pub n_curves: usize,
    pub n_loops: usize,
    /// Upper bound for the side length of sampled commutator loops.
    pub loop_size: f64,
    pub seed: u64,
}

impl Default for HolonomyOptions {
    fn default() -> Self {
        Self { sampler: CurveSampler::default(), n_curves: 50, n_loops: 20, loop_size: 0.3, seed: 0x401 }
    }
}

/// `L_p` with the sampled tensors and the closure dimension after each curve.
#[derive(Clone, Debug)]
pub struct LpResult {
    pub algebra: CurvatureEndoAlgebra,
    pub tensors: TransportedTensorSet,
    /// Closure dimension after `0, 1, ..., n_curves` curves.
    pub stabilization: Vec<usize>,
    /// Smallest curve count reaching the final dimension.
    pub stabilized_at: usize,
}

/// Transported frames `tau_c` (columns: transported normal basis) at the end
/// of each curve, computed in parallel.
fn transported_frames(
    germ: &OrbitGerm,
    sampler: &CurveSampler,
    n: usize,
    seed: u64,
) -> Result<Vec<(Point, DMatrix<f64>)>> {
    let curves = sampler.sample_many(&germ.family, n, seed);
    curves
        .par_iter()
        .map(|c| {
            let t = normal_parallel_transport(&germ.family, &germ.point, c, &germ.normal, TransportMethod::ClosedForm)?;
            Ok((t.end_point().clone(), t.end_frame().clone()))
        })
        .collect()
}

/// Lie algebra generated by `tau_c(R_{c(1)})(x, y)` over sampled curves and
/// all pairs of basis vectors.
pub fn build_l_p(germ: &OrbitGerm, sampler: &CurveSampler, n_curves: usize, seed: u64) -> Result<LpResult> {
    let k = germ.codim();
    let base = project_curvature(germ);
    let mut alg = lie_closure(k, &base.endomorphisms())?;
    let mut stabilization = vec![alg.dim()];
    let frames = transported_frames(germ, sampler, n_curves, seed)?;
    let tensors: Vec<_> = frames.par_iter().map(|(_, f)| curvature_on(&germ.family, f)).collect();
    let mut set = TransportedTensorSet::default();
    for (i, t) in tensors.into_iter().enumerate() {
        alg = extend_closure(alg, &t.endomorphisms())?;
        stabilization.push(alg.dim());
        set.samples.push((i, t));
    }
    let last = *stabilization.last().expect("non-empty");
    let stabilized_at = stabilization.iter().position(|&d| d == last).unwrap_or(0);
    Ok(LpResult {
        algebra: CurvatureEndoAlgebra { provenance: Provenance::CurvatureClosure, algebra: alg },
        tensors: set,
        stabilization,
        stabilized_at,
    })
}

/// Sampled approximation of the restricted normal holonomy algebra.
#[derive(Clone, Debug)]
pub struct NormalHolonomy {
    pub algebra: CurvatureEndoAlgebra,
    pub curves: usize,
    pub loops: usize,
    /// Loops whose holonomy was too close to a half-turn to take a logarithm.
    pub skipped_loops: usize,
    pub stabilization: Vec<usize>,
}

/// Closure of normal-curvature endomorphisms transported back to `p` and of
/// logarithms of small-loop holonomies.
pub fn sample_normal_holonomy(germ: &OrbitGerm, opts: &HolonomyOptions) -> Result<NormalHolonomy> {
    let k = germ.codim();
    let m = germ.dim();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect();
    let local: Vec<_> = pairs.iter().map(|&(a, b)| germ.normal_curvature(a, b)).collect();
    let mut alg = lie_closure(k, &local)?;
    let mut stabilization = vec![alg.dim()];
    let frames = transported_frames(germ, &opts.sampler, opts.n_curves, rng::derive(opts.seed, 1))?;
    let pulled: Vec<Vec<DMatrix<f64>>> = frames
        .par_iter()
        .map(|(q, f)| {
            let gq = germ.at(q.clone());
            if gq.codim() != k {
                return Vec::new();
            }
            let map = gq.normal.transpose() * f;
            (0..gq.dim())
                .flat_map(|a| (a + 1..gq.dim()).map(move |b| (a, b)))
                .map(|(a, b)| map.transpose() * gq.normal_curvature(a, b) * &map)
                .collect()
        })
        .collect();
    for gens in &pulled {
        alg = extend_closure(alg, gens)?;
        stabilization.push(alg.dim());
    }
    let mut skipped = 0;
    if germ.family.dim_h() >= 2 && k > 0 {
        let mut r = rng::seeded(rng::derive(opts.seed, 2));
        for _ in 0..opts.n_loops {
            let za = rng::unit_in_span(&mut r, &germ.family.h);
            let zb = rng::unit_in_span(&mut r, &germ.family.h);
            let s = opts.loop_size * r.random_range(0.5..1.0);
            let c = commutator_loop(&germ.family, &za, &zb, s);
            let tau = loop_holonomy(germ, &c, TransportMethod::ClosedForm)?;
            match linalg::log_orthogonal(&tau) {
                Ok(l) => alg = extend_closure(alg, &[l])?,
                Err(_) => skipped += 1,
            }
            stabilization.push(alg.dim());
        }
    }
    Ok(NormalHolonomy {
        algebra: CurvatureEndoAlgebra { provenance: Provenance::NormalHolonomy, algebra: alg },
        curves: opts.n_curves,
        loops: opts.n_loops,
        skipped_loops: skipped,
        stabilization,
    })
}

/// Everything assembled at a point: `L_p`, the splitting, the sampled
/// normal holonomy and the algebra of `hat G_p`.
#[derive(Clone, Debug)]
pub struct HatG {
    pub l_p: LpResult,
    pub decomposition: InvariantDecomposition,
    pub phi: NormalHolonomy,
    pub algebra: CurvatureEndoAlgebra,
    /// `max |(I - P_i) X P_i|` for `X` in the sampled normal holonomy.
    pub phi_invariance_residual: f64,
    /// `max |P_j X P_i|`, `i != j`, over the `hat G_p` basis.
    pub product_residual: f64,
}

/// Block description used in reports.
#[derive(Clone, Debug, Serialize)]
pub struct BlockReport {
    pub dim: usize,
    pub irreducible: bool,
    pub trivial: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionReport {
    pub dim_l_p: usize,
    pub dim_hat_g: usize,
    pub dim_phi: usize,
    pub blocks: Vec<BlockReport>,
    pub stabilization_curve_counts: Vec<usize>,
    pub stabilized_at: usize,
    pub phi_invariance_residual: f64,
    pub product_residual: f64,
}

impl HatG {
    pub fn report(&self) -> DecompositionReport {
        let blocks = self
            .decomposition
            .block_dims()
            .into_iter()
            .enumerate()
            .map(|(i, dim)| BlockReport { dim, irreducible: self.decomposition.irreducible[i], trivial: i == 0 })
            .collect();
        DecompositionReport {
            dim_l_p: self.l_p.algebra.dim(),
            dim_hat_g: self.algebra.dim(),
            dim_phi: self.phi.algebra.dim(),
            blocks,
            stabilization_curve_counts: self.l_p.stabilization.clone(),
            stabilized_at: self.l_p.stabilized_at,
            phi_invariance_residual: self.phi_invariance_residual,
            product_residual: self.product_residual,
        }
    }

    /// Sample of group elements of `hat G_p` acting on normal coordinates.
    pub fn sample_group(&self, count: usize, seed: u64) -> Vec<DMatrix<f64>> {
        haar_sample(&self.algebra.algebra, count, seed).into_iter().map(|g| g.matrix).collect()
    }
}

/// Closure of `L_p` and the sampled normal holonomy restricted to `V_0`.
pub fn build_hat_g(germ: &OrbitGerm, opts: &HolonomyOptions) -> Result<HatG> {
    let l_p = build_l_p(germ, &opts.sampler, opts.n_curves, opts.seed)?;
    let decomposition = invariant_decomposition(&l_p.algebra.algebra, rng::derive(opts.seed, 3))?;
    let phi = sample_normal_holonomy(germ, opts)?;
    let p0 = decomposition.projector(0);
    let restricted: Vec<_> = phi.algebra.basis().iter().map(|x| &p0 * x * &p0).collect();
    let hat = extend_closure(l_p.algebra.algebra.clone(), &restricted)?;
    let phi_invariance_residual = decomposition.invariance_residual(phi.algebra.basis());
    let projectors: Vec<_> = (0..decomposition.subspaces.len()).map(|i| decomposition.projector(i)).collect();
    let mut product_residual: f64 = 0.0;
    for x in &hat.basis {
        for (i, pi) in projectors.iter().enumerate() {
            for (j, pj) in projectors.iter().enumerate() {
                if i != j {
                    product_residual = product_residual.max((pj * x * pi).norm());
                }
            }
        }
    }
    Ok(HatG {
        l_p,
        decomposition,
        phi,
        algebra: CurvatureEndoAlgebra { provenance: Provenance::HatG, algebra: hat },
        phi_invariance_residual,
        product_residual,
    })
}

/// Number of group samples averaged per parallel chunk; fixed so that the
/// summation order, and hence the result, does not depend on scheduling.
const AVERAGE_CHUNK: usize = 256;

/// Average of `g^{-1} R(g., g.) g` over group elements sampled from `alg`.
///
/// Requires nonzero scalar curvature on every irreducible block of `alg`;
/// the zero tensor is returned unchanged.
pub fn simons_symmetrize(
    tensor: &AlgebraicCurvatureTensor,
    alg: &MatrixLieAlgebra,
    n_samples: usize,
    seed: u64,
) -> Result<AlgebraicCurvatureTensor> {
    if tensor.dim != alg.space_dim {
        return Err(Error::Invalid("tensor and algebra act on different spaces".into()));
    }
    if tensor::is_zero(tensor, 1.0) {
        return Ok(tensor.clone());
    }
    if n_samples == 0 {
        return Err(Error::Invalid("at least one group sample is required".into()));
    }
    let dec = invariant_decomposition(alg, rng::derive(seed, 0x5e))?;
    for i in 1..dec.subspaces.len() {
        let s = tensor.restrict(&dec.subspaces[i]).scalar_curvature();
        if s.abs() <= 1e-12 * tensor.norm().max(1.0) {
            return Err(Error::Precondition(format!("block V_{i} has vanishing scalar curvature")));
        }
    }
    let samples = haar_sample(alg, n_samples, seed);
    let partial: Vec<AlgebraicCurvatureTensor> = samples
        .par_chunks(AVERAGE_CHUNK)
        .map(|chunk| {
            let mut acc = AlgebraicCurvatureTensor::zeros(tensor.dim);
            for g in chunk {
                acc.add_assign(&tensor.pullback(&g.matrix));
            }
            acc
        })
        .collect();
    let mut total = AlgebraicCurvatureTensor::zeros(tensor.dim);
    for p in &partial {
        total.add_assign(p);
    }
    Ok(total.scaled(1.0 / n_samples as f64))
}

/// `max_g |g^{-1} R(g., g.) g - R|` over `n_test` sampled group elements.
pub fn invariance_residual(tensor: &AlgebraicCurvatureTensor, alg: &MatrixLieAlgebra, n_test: usize, seed: u64) -> f64 {
    haar_sample(alg, n_test, seed)
        .par_iter()
        .map(|g| tensor.pullback(&g.matrix).distance(tensor))
        .reduce(|| 0.0, f64::max)
}

/// Algebra generated by the endomorphisms `R(x, y)` of one tensor.
pub fn tensor_algebra(tensor: &AlgebraicCurvatureTensor) -> Result<CurvatureEndoAlgebra> {
    Ok(CurvatureEndoAlgebra {
        provenance: Provenance::TensorAlgebra,
        algebra: lie_closure(tensor.dim, &tensor.endomorphisms())?,
    })
}

/// Whether `a` and `b` span the same algebra within `tol_angle`.
pub fn same_algebra(a: &MatrixLieAlgebra, b: &MatrixLieAlgebra, tol_angle: f64) -> bool {
    a.dim() == b.dim() && (a.dim() == 0 || a.distance(b) <= tol_angle)
}

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::MatrixLieAlgebra;
use crate::linalg;
use crate::rng;
use crate::tol;

/// Fresh generic commutant elements tried before giving up.
pub const DECOMPOSITION_RETRIES: usize = 3;

/// Orthogonal splitting `V_0 + V_1 + ... + V_k` of the space acted on by a
/// subalgebra of `so(k)`. `V_0` is the joint kernel and always comes first.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantDecomposition {
    pub space_dim: usize,
    /// Orthonormal bases; `subspaces[0]` is `V_0` (possibly empty).
    #[serde(skip)]
    pub subspaces: Vec<DMatrix<f64>>,
    /// Commutant dimension of each block (`1`, `2` or `4` when irreducible).
    pub commutant_dims: Vec<usize>,
    /// Whether each block `i >= 1` was certified irreducible.
    pub irreducible: Vec<bool>,
    pub trivial_index: usize,
    /// Generic commutant elements used, including the successful one.
    pub attempts: usize,
}

impl InvariantDecomposition {
    /// Number of blocks `V_i` with `i >= 1`.
    pub fn nontrivial_count(&self) -> usize {
        self.subspaces.len() - 1
    }

    pub fn trivial(&self) -> &DMatrix<f64> {
        &self.subspaces[0]
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.subspaces.iter().map(|s| s.ncols()).collect()
    }

    pub fn projector(&self, i: usize) -> DMatrix<f64> {
        linalg::projector(&self.subspaces[i])
    }

    /// Largest `|(I - P_i) X P_i|` over blocks and basis elements of `alg`.
    pub fn invariance_residual(&self, generators: &[DMatrix<f64>]) -> f64 {
        let eye = DMatrix::<f64>::identity(self.space_dim, self.space_dim);
        let mut worst: f64 = 0.0;
        for s in &self.subspaces {
            let p = linalg::projector(s);
            let q = &eye - &p;
            for x in generators {
                worst = worst.max((&q * x * &p).norm());
            }
        }
        worst
    }

    /// Largest `|X v|` over `v` in `V_0`.
    pub fn kernel_residual(&self, generators: &[DMatrix<f64>]) -> f64 {
        generators.iter().map(|x| (x * self.trivial()).norm()).fold(0.0, f64::max)
    }

    /// Deviation of the blocks from an orthonormal basis of the whole space.
    pub fn spanning_residual(&self) -> f64 {
        let cols: usize = self.block_dims().iter().sum();
        let mut all = DMatrix::zeros(self.space_dim, cols);
        let mut c = 0;
        for s in &self.subspaces {
            all.columns_mut(c, s.ncols()).copy_from(s);
            c += s.ncols();
        }
        if cols != self.space_dim {
            return f64::INFINITY;
        }
        linalg::orthogonality_residual(&all)
    }
}

/// Basis of `{C : X C = C X}` on `R^m` for the given matrices.
pub fn commutant(generators: &[DMatrix<f64>], m: usize) -> Vec<DMatrix<f64>> {
    if generators.is_empty() {
        return (0..m * m)
            .map(|i| {
                let mut c = DMatrix::zeros(m, m);
                c[(i % m, i / m)] = 1.0;
                c
            })
            .collect();
    }
    // vec(X C - C X) = (I (x) X - X^T (x) I) vec(C) in column-major order.
    let eye = DMatrix::<f64>::identity(m, m);
    let mut rows = DMatrix::zeros(generators.len() * m * m, m * m);
    for (g, x) in generators.iter().enumerate() {
        let block = eye.kronecker(x) - x.transpose().kronecker(&eye);
        rows.view_mut((g * m * m, 0), (m * m, m * m)).copy_from(&block);
    }
    let scale = generators.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let ns = null_space_scaled(&rows, scale);
    (0..ns.ncols()).map(|j| DMatrix::from_column_slice(m, m, ns.column(j).as_slice())).collect()
}

fn null_space_scaled(m: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    let svd = linalg::svd_sorted(m);
    let floor = tol::ZERO_ABS.max(1e-8 * scale.max(svd.s.first().copied().unwrap_or(0.0)));
    let r = svd.s.iter().filter(|&&s| s > floor).count();
    svd.v.columns(r, m.ncols() - r).into_owned()
}

/// Orthonormal basis (flattened) of the symmetric part of the commutant.
fn symmetric_commutant(generators: &[DMatrix<f64>], m: usize) -> Vec<DMatrix<f64>> {
    let c = commutant(generators, m);
    if c.is_empty() {
        return c;
    }
    let cols: Vec<_> = c.iter().map(|x| linalg::flatten(&((x + x.transpose()) * 0.5))).collect();
    let span = linalg::orthonormal_span(&linalg::columns(m * m, &cols));
    (0..span.ncols()).map(|j| DMatrix::from_column_slice(m, m, span.column(j).as_slice())).collect()
}

/// Split `R^k` into the joint kernel and irreducible invariant subspaces.
///
/// The complement of the kernel is split by the eigenspaces of a random
/// symmetric element of the commutant. Each block is certified irreducible
/// by checking that its symmetric commutant consists of scalars only.
pub fn invariant_decomposition(alg: &MatrixLieAlgebra, seed: u64) -> Result<InvariantDecomposition> {
    decompose_generators(&alg.basis, alg.space_dim, seed)
}

pub(crate) fn decompose_generators(gens: &[DMatrix<f64>], k: usize, seed: u64) -> Result<InvariantDecomposition> {
    let gens: Vec<DMatrix<f64>> = gens.iter().filter(|g| g.norm() > tol::ZERO_ABS).cloned().collect();
    if gens.is_empty() {
        return Ok(InvariantDecomposition {
            space_dim: k,
            subspaces: vec![DMatrix::identity(k, k)],
            commutant_dims: vec![k * k],
            irreducible: vec![false],
            trivial_index: 0,
            attempts: 0,
        });
    }
    let mut stacked = DMatrix::zeros(gens.len() * k, k);
    for (i, g) in gens.iter().enumerate() {
        stacked.view_mut((i * k, 0), (k, k)).copy_from(g);
    }
    let scale = gens.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let v0 = null_space_scaled(&stacked, scale);
    let w = linalg::complement_in(&v0, &DMatrix::identity(k, k));
    let m = w.ncols();
    let restricted: Vec<_> = gens.iter().map(|g| w.transpose() * g * &w).collect();
    let sym = symmetric_commutant(&restricted, m);
    let mut last = String::new();
    for attempt in 0..=DECOMPOSITION_RETRIES {
        let mut r = rng::seeded(rng::derive(seed, attempt as u64));
        let coeffs = rng::gaussian_vector(&mut r, sym.len());
        let s = sym.iter().zip(coeffs.iter()).fold(DMatrix::zeros(m, m), |acc, (b, c)| acc + b * *c);
        match split_by_eigenspaces(&s, &restricted) {
            Ok(blocks) => {
                let mut subspaces = vec![v0.clone()];
                let mut commutant_dims = vec![k * k];
                let mut irreducible = vec![false];
                for b in blocks {
                    let inner: Vec<_> = restricted.iter().map(|g| b.transpose() * g * &b).collect();
                    commutant_dims.push(commutant(&inner, b.ncols()).len());
                    irreducible.push(true);
                    subspaces.push(&w * b);
                }
                return Ok(InvariantDecomposition {
                    space_dim: k,
                    subspaces,
                    commutant_dims,
                    irreducible,
                    trivial_index: 0,
                    attempts: attempt + 1,
                });
            }
            Err(e) => last = e,
        }
    }
    Err(Error::DecompositionUnstable { attempts: DECOMPOSITION_RETRIES + 1, detail: last })
}

/// Eigenspaces of the symmetric `s`, each checked for invariance and
/// irreducibility under `gens`.
fn split_by_eigenspaces(s: &DMatrix<f64>, gens: &[DMatrix<f64>]) -> std::result::Result<Vec<DMatrix<f64>>, String> {
    let m = s.nrows();
    let (vals, vecs) = linalg::sym_eigen(s);
    let spread = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let cluster_tol = 1e-7 * spread;
    let gap_min = 1e-4 * spread;
    let mut blocks = Vec::new();
    let mut start = 0;
    for i in 1..=m {
        if i == m || vals[i] - vals[i - 1] > cluster_tol {
            if i < m && vals[i] - vals[i - 1] < gap_min {
                return Err(format!("eigenvalues {:.3e} and {:.3e} nearly coincide", vals[i - 1], vals[i]));
            }
            blocks.push(vecs.columns(start, i - start).into_owned());
            start = i;
        }
    }
    let eye = DMatrix::<f64>::identity(m, m);
    for b in &blocks {
        let p = linalg::projector(b);
        for g in gens {
            let r = ((&eye - &p) * g * &p).norm();
            if r > tol::MEMBERSHIP * g.norm().max(1.0) {
                return Err(format!("eigenspace not invariant: residual {r:.3e}"));
            }
        }
        let inner: Vec<_> = gens.iter().map(|g| b.transpose() * g * b).collect();
        let d = symmetric_commutant(&inner, b.ncols()).len();
        if d != 1 {
            return Err(format!("block of dimension {} has symmetric commutant of dimension {d}", b.ncols()));
        }
    }
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::lie_closure;

    fn rot(k: usize, i: usize, j: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(k, k);
        m[(i, j)] = -1.0;
        m[(j, i)] = 1.0;
        m
    }

    #[test]
    fn zero_algebra_is_all_kernel() {
        let d = invariant_decomposition(&MatrixLieAlgebra::trivial(3), 1).unwrap();
        assert_eq!(d.block_dims(), vec![3]);
        assert_eq!(d.nontrivial_count(), 0);
    }

    #[test]
    fn rotation_plus_trivial_line() {
        let a = lie_closure(3, &[rot(3, 0, 2)]).unwrap();
        let d = invariant_decomposition(&a, 5).unwrap();
        assert_eq!(d.block_dims(), vec![1, 2]);
        assert!((d.trivial()[(1, 0)].abs() - 1.0).abs() < 1e-12);
        assert_eq!(d.commutant_dims[1], 2);
        assert!(d.invariance_residual(&a.basis) < 1e-12);
        assert!(d.spanning_residual() < 1e-12);
    }

    #[test]
    fn so3_is_irreducible() {
        let a = lie_closure(3, &[rot(3, 0, 1), rot(3, 1, 2)]).unwrap();
        let d = invariant_decomposition(&a, 9).unwrap();
        assert_eq!(d.block_dims(), vec![0, 3]);
        assert_eq!(d.commutant_dims[1], 1);
    }

    #[test]
    fn two_equal_rotation_planes_split() {
        // The diagonal circle acting on R^2 + R^2 has commutant gl(2, C);
        // a generic symmetric element splits it into two complex lines.
        let j = rot(4, 0, 1) + rot(4, 2, 3);
        let a = lie_closure(4, &[j]).unwrap();
        let d = invariant_decomposition(&a, 3).unwrap();
        assert_eq!(d.block_dims(), vec![0, 2, 2]);
        assert!(d.invariance_residual(&a.basis) < 1e-10);
        let e = invariant_decomposition(&a, 4).unwrap();
        assert_eq!(e.block_dims(), vec![0, 2, 2]);
    }

    #[test]
    fn u2_on_c2_is_irreducible() {
        // u(2) acting on C^2 = R^4: commutant is C.
        let i1 = rot(4, 0, 1) + rot(4, 2, 3);
        let a = lie_closure(4, &[i1, rot(4, 0, 2) + rot(4, 1, 3) * -1.0, rot(4, 0, 1) - rot(4, 2, 3)]).unwrap();
        let d = invariant_decomposition(&a, 2).unwrap();
        assert_eq!(d.block_dims(), vec![0, 4]);
    }
}

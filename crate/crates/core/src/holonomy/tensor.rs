use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::tol;

/// Algebraic curvature tensor on `R^k` stored as `<R(e_x, e_y) e_z, e_w>`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlgebraicCurvatureTensor {
    pub dim: usize,
    values: Vec<f64>,
}

/// Largest violation of each algebraic identity.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct TensorResiduals {
    pub antisym_xy: f64,
    pub antisym_zw: f64,
    pub pair_symmetry: f64,
    pub bianchi: f64,
}

impl TensorResiduals {
    pub fn max(&self) -> f64 {
        self.antisym_xy.max(self.antisym_zw).max(self.pair_symmetry).max(self.bianchi)
    }
}

impl AlgebraicCurvatureTensor {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, values: vec![0.0; dim.pow(4)] }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for x in 0..dim {
            for y in 0..dim {
                for z in 0..dim {
                    for w in 0..dim {
                        let i = t.idx(x, y, z, w);
                        t.values[i] = f(x, y, z, w);
                    }
                }
            }
        }
        t
    }

    /// Tensor of constant sectional curvature `kappa`:
    /// `R(x, y) z = kappa (<y, z> x - <x, z> y)`.
    pub fn constant_curvature(dim: usize, kappa: f64) -> Self {
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        Self::from_fn(dim, |x, y, z, w| kappa * (d(y, z) * d(x, w) - d(x, z) * d(y, w)))
    }

    /// Tensor whose curvature operator on `Lambda^2` is the symmetric matrix
    /// `op`, indexed by pairs `(i, j)` with `i < j` in lexicographic order.
    pub fn from_curvature_operator(dim: usize, op: &DMatrix<f64>) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|i| (i + 1..dim).map(move |j| (i, j))).collect();
        if op.shape() != (pairs.len(), pairs.len()) {
            return Err(Error::Invalid(format!("curvature operator must be {0}x{0}", pairs.len())));
        }
        let sign_index = |a: usize, b: usize| -> Option<(f64, usize)> {
            if a == b {
                return None;
            }
            let (s, p) = if a < b { (1.0, (a, b)) } else { (-1.0, (b, a)) };
            pairs.iter().position(|&q| q == p).map(|i| (s, i))
        };
        let t = Self::from_fn(dim, |x, y, z, w| match (sign_index(x, y), sign_index(w, z)) {
            (Some((s1, i)), Some((s2, j))) => s1 * s2 * op[(i, j)],
            _ => 0.0,
        });
        Ok(t)
    }

    fn idx(&self, x: usize, y: usize, z: usize, w: usize) -> usize {
        ((x * self.dim + y) * self.dim + z) * self.dim + w
    }

    pub fn get(&self, x: usize, y: usize, z: usize, w: usize) -> f64 {
        self.values[self.idx(x, y, z, w)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { dim: self.dim, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    /// Matrix of the skew endomorphism `R(e_x, e_y)`.
    pub fn endomorphism(&self, x: usize, y: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |w, z| self.get(x, y, z, w))
    }

    /// `R(e_x, e_y)` for all `x < y`.
    pub fn endomorphisms(&self) -> Vec<DMatrix<f64>> {
        (0..self.dim).flat_map(|x| (x + 1..self.dim).map(move |y| (x, y))).map(|(x, y)| self.endomorphism(x, y)).collect()
    }

    /// Scalar curvature `sum_ij <R(e_i, e_j) e_j, e_i>`.
    pub fn scalar_curvature(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.get(i, j, j, i);
            }
        }
        s
    }

    pub fn residuals(&self) -> TensorResiduals {
        let mut r = TensorResiduals::default();
        let n = self.dim;
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    for w in 0..n {
                        let v = self.get(x, y, z, w);
                        r.antisym_xy = r.antisym_xy.max((v + self.get(y, x, z, w)).abs());
                        r.antisym_zw = r.antisym_zw.max((v + self.get(x, y, w, z)).abs());
                        r.pair_symmetry = r.pair_symmetry.max((v - self.get(z, w, x, y)).abs());
                        let b = v + self.get(y, z, x, w) + self.get(z, x, y, w);
                        r.bianchi = r.bianchi.max(b.abs());
                    }
                }
            }
        }
        r
    }

    /// Check all identities within `1e-9` relative to the tensor size.
    pub fn validate(&self) -> Result<()> {
        let r = self.residuals().max();
        if r > 1e-9 * self.norm().max(1.0) {
            return Err(Error::Invalid(format!("not an algebraic curvature tensor: residual {r:.3e}")));
        }
        Ok(())
    }

    /// `(x, y, z, w) -> R(Bx, By, Bz, Bw)` for a `dim x m` matrix `B`.
    ///
    /// With `B` orthogonal this is `B^{-1} R(B., B.) B`; with orthonormal
    /// columns it restricts the tensor to their span.
    pub fn pullback(&self, b: &DMatrix<f64>) -> Self {
        assert_eq!(b.nrows(), self.dim, "pullback matrix has wrong row count");
        let n = self.dim;
        let m = b.ncols();
        // Contract one slot at a time; each pass moves the contracted slot to
        // the back so four passes restore the order.
        let mut cur = self.values.clone();
        let mut dims = [n, n, n, n];
        for _ in 0..4 {
            let inner = dims[1] * dims[2] * dims[3];
            let mut next = vec![0.0; m * inner];
            for a in 0..dims[0] {
                for r in 0..inner {
                    let v = cur[a * inner + r];
                    if v == 0.0 {
                        continue;
                    }
                    for c in 0..m {
                        next[r * m + c] += v * b[(a, c)];
                    }
                }
            }
            cur = next;
            dims = [dims[1], dims[2], dims[3], m];
        }
        Self { dim: m, values: cur }
    }

    /// Restriction to the span of orthonormal columns.
    pub fn restrict(&self, basis: &DMatrix<f64>) -> Self {
        self.pullback(basis)
    }
}

/// `tau(R)(x, y) z = psi^{-1} R(psi x, psi y) psi z` for an isometry `psi`
/// written in orthonormal bases of the two normal spaces.
pub fn transport_tensor(tensor: &AlgebraicCurvatureTensor, psi: &DMatrix<f64>) -> Result<AlgebraicCurvatureTensor> {
    if psi.shape() != (tensor.dim, tensor.dim) {
        return Err(Error::Invalid("transport map has the wrong shape".into()));
    }
    let r = linalg::orthogonality_residual(psi);
    if r > 1e-9 {
        return Err(Error::NotOrthogonal(r));
    }
    Ok(tensor.pullback(psi))
}

/// Sampled curvature tensors `tau_c(R_{c(1)})` with the curve indices.
#[derive(Clone, Debug, Default, Serialize)]
pub struct TransportedTensorSet {
    pub samples: Vec<(usize, AlgebraicCurvatureTensor)>,
}

impl TransportedTensorSet {
    /// Largest identity violation over all members.
    pub fn max_residual(&self) -> f64 {
        self.samples.iter().map(|(_, t)| t.residuals().max()).fold(0.0, f64::max)
    }
}

/// Whether a tensor vanishes at rank tolerance relative to `scale`.
pub(crate) fn is_zero(t: &AlgebraicCurvatureTensor, scale: f64) -> bool {
    t.norm() <= tol::ZERO_ABS.max(tol::RANK_REL * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rot(theta: f64) -> DMatrix<f64> {
        let (s, c) = theta.sin_cos();
        DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0])
    }

    #[test]
    fn constant_curvature_identities() {
        let t = AlgebraicCurvatureTensor::constant_curvature(4, 0.7);
        assert!(t.residuals().max() < 1e-15);
        assert!((t.scalar_curvature() - 0.7 * 12.0).abs() < 1e-12);
        assert!((t.get(0, 1, 1, 0) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn curvature_operator_round_trip() {
        let op = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let t = AlgebraicCurvatureTensor::from_curvature_operator(3, &op).unwrap();
        assert!(t.residuals().max() < 1e-15);
        assert_eq!(t.get(0, 1, 1, 0), 1.0);
        assert_eq!(t.get(0, 2, 2, 0), 2.0);
        assert_eq!(t.get(1, 2, 2, 1), 3.0);
    }

    #[test]
    fn pullback_by_rotation_matches_direct_formula() {
        let op = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, 3.0]);
        let t = AlgebraicCurvatureTensor::from_curvature_operator(3, &op).unwrap();
        let g = rot(0.4);
        let p = t.pullback(&g);
        let mut worst: f64 = 0.0;
        for x in 0..3 {
            for y in 0..3 {
                for z in 0..3 {
                    for w in 0..3 {
                        let mut d = 0.0;
                        for a in 0..3 {
                            for b in 0..3 {
                                for c in 0..3 {
                                    for e in 0..3 {
                                        d += g[(a, x)] * g[(b, y)] * g[(c, z)] * g[(e, w)] * t.get(a, b, c, e);
                                    }
                                }
                            }
                        }
                        worst = worst.max((d - p.get(x, y, z, w)).abs());
                    }
                }
            }
        }
        assert!(worst < 1e-14);
        assert!((p.scalar_curvature() - t.scalar_curvature()).abs() < 1e-12);
    }

    #[test]
    fn transport_rejects_non_orthogonal() {
        let t = AlgebraicCurvatureTensor::constant_curvature(2, 1.0);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(transport_tensor(&t, &m), Err(Error::NotOrthogonal(_))));
        assert_eq!(transport_tensor(&t, &DMatrix::identity(2, 2)).unwrap(), t);
    }

    #[test]
    fn endomorphisms_are_skew() {
        let t = AlgebraicCurvatureTensor::constant_curvature(3, 1.0);
        for e in t.endomorphisms() {
            assert!(linalg::skew_residual(&e) < 1e-15);
        }
    }
}

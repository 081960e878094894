use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

/// A complex matrix representation `re + i*im` of the basis, kept when an
/// algebra is generated from matrices so that named involutions can act on it.
#[derive(Clone, Debug)]
pub struct MatrixRep {
    pub re: Vec<DMatrix<f64>>,
    pub im: Vec<DMatrix<f64>>,
}

impl MatrixRep {
    /// Coordinates of `re + i*im` in the basis (least squares).
    pub fn coordinates(&self, re: &DMatrix<f64>, im: &DMatrix<f64>) -> DVector<f64> {
        let m = re.len();
        let n = self.re.len();
        let mut a = DMatrix::zeros(2 * m, n);
        for j in 0..n {
            a.view_mut((0, j), (m, 1)).copy_from_slice(self.re[j].as_slice());
            a.view_mut((m, j), (m, 1)).copy_from_slice(self.im[j].as_slice());
        }
        let mut b = DVector::zeros(2 * m);
        b.rows_mut(0, m).copy_from_slice(re.as_slice());
        b.rows_mut(m, m).copy_from_slice(im.as_slice());
        crate::linalg::lstsq(&a, &b)
    }
}

/// Real Lie algebra given by structure constants `[e_i, e_j] = sum_k c_ijk e_k`.
#[derive(Clone, Debug)]
pub struct LieAlgebra {
    name: String,
    labels: Vec<String>,
    ad: Vec<DMatrix<f64>>,
    rep: Option<MatrixRep>,
    involution: Option<DMatrix<f64>>,
}

/// JSON form of an algebra.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlgebraDoc {
    pub name: String,
    pub dim: usize,
    pub basis_labels: Vec<String>,
    pub bracket: Vec<(usize, usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub involution: Option<Vec<Vec<f64>>>,
}

impl LieAlgebra {
    /// Build from sparse triplets `(i, j, k, c_ijk)` and validate antisymmetry
    /// and the Jacobi identity.
    pub fn from_structure_constants(
        name: &str,
        labels: Vec<String>,
        triplets: &[(usize, usize, usize, f64)],
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Invalid("algebra has dimension 0".into()));
        }
        let mut ad = vec![DMatrix::zeros(n, n); n];
        for &(i, j, k, c) in triplets {
            if i >= n || j >= n || k >= n {
                return Err(Error::Invalid(format!(
                    "bracket triplet ({i},{j},{k}) out of range for dimension {n}"
                )));
            }
            if !c.is_finite() {
                return Err(Error::Invalid("non-finite structure constant".into()));
            }
            ad[i][(k, j)] += c;
        }
        let alg = LieAlgebra { name: name.to_string(), labels, ad, rep: None, involution: None };
        let anti = alg.antisymmetry_residual();
        if anti > tol::LIE_STRUCT {
            return Err(Error::NotALieAlgebra {
                property: "antisymmetry",
                residual: anti,
                tolerance: tol::LIE_STRUCT,
            });
        }
        let jac = alg.jacobi_residual();
        if jac > tol::LIE_STRUCT {
            return Err(Error::NotALieAlgebra {
                property: "the Jacobi identity",
                residual: jac,
                tolerance: tol::LIE_STRUCT,
            });
        }
        Ok(alg)
    }

    pub(crate) fn with_rep(mut self, rep: MatrixRep) -> Self {
        self.rep = Some(rep);
        self
    }

    pub fn from_doc(doc: &AlgebraDoc) -> Result<Self> {
        if doc.basis_labels.len() != doc.dim {
            return Err(Error::Invalid(format!(
                "dim {} does not match {} basis labels",
                doc.dim,
                doc.basis_labels.len()
            )));
        }
        let mut alg = Self::from_structure_constants(&doc.name, doc.basis_labels.clone(), &doc.bracket)?;
        if let Some(rows) = &doc.involution {
            if rows.len() != doc.dim || rows.iter().any(|r| r.len() != doc.dim) {
                return Err(Error::Invalid("involution matrix has the wrong shape".into()));
            }
            alg.involution = Some(DMatrix::from_fn(doc.dim, doc.dim, |i, j| rows[i][j]));
        }
        Ok(alg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(&serde_json::from_str(text)?)
    }

    pub fn to_doc(&self) -> AlgebraDoc {
        let n = self.dim();
        let mut bracket = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = self.ad[i][(k, j)];
                    if c != 0.0 {
                        bracket.push((i, j, k, c));
                    }
                }
            }
        }
        AlgebraDoc {
            name: self.name.clone(),
            dim: n,
            basis_labels: self.labels.clone(),
            bracket,
            involution: self
                .involution
                .as_ref()
                .map(|m| (0..n).map(|i| m.row(i).iter().copied().collect()).collect()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("serializable")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn rep(&self) -> Option<&MatrixRep> {
        self.rep.as_ref()
    }

    /// Involution stored alongside the structure constants, if any.
    pub fn stored_involution(&self) -> Option<&DMatrix<f64>> {
        self.involution.as_ref()
    }

    /// `ad(e_i)` as a matrix acting on coordinate vectors.
    pub fn ad_basis(&self, i: usize) -> &DMatrix<f64> {
        &self.ad[i]
    }

    pub fn ad(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, a) in self.ad.iter().enumerate() {
            if x[i] != 0.0 {
                m += a * x[i];
            }
        }
        m
    }

    pub fn bracket(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        self.ad(x) * y
    }

    /// Killing form matrix `B_ij = tr(ad e_i ad e_j)`.
    pub fn killing(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| (&self.ad[i] * &self.ad[j]).trace())
    }

    /// True when the Killing form is negative definite.
    pub fn is_compact_semisimple(&self) -> bool {
        let (vals, _) = crate::linalg::sym_eigen(&self.killing());
        vals.last().is_some_and(|&v| v < -1e-10)
    }

    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = (self.ad[i].column(j) + self.ad[j].column(i)).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Largest norm of `[e_i,[e_j,e_k]] + [e_j,[e_k,e_i]] + [e_k,[e_i,e_j]]`.
    pub fn jacobi_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let jk = self.ad[j].column(k).into_owned();
                    let ki = self.ad[k].column(i).into_owned();
                    let ij = self.ad[i].column(j).into_owned();
                    let r = &self.ad[i] * jk + &self.ad[j] * ki + &self.ad[k] * ij;
                    worst = worst.max(r.norm());
                }
            }
        }
        worst
    }

    /// Residual of `span(vectors)` being closed under the bracket.
    pub fn subalgebra_residual(&self, basis: &DMatrix<f64>) -> f64 {
        let q = crate::linalg::orthonormal_span(basis);
        let p = crate::linalg::projector(&q);
        let eye = DMatrix::<f64>::identity(self.dim(), self.dim());
        let mut worst: f64 = 0.0;
        for a in 0..q.ncols() {
            for b in a + 1..q.ncols() {
                let br = self.bracket(&q.column(a).into_owned(), &q.column(b).into_owned());
                worst = worst.max(((&eye - &p) * br).norm());
            }
        }
        worst
    }
}

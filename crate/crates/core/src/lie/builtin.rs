use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::algebra::{LieAlgebra, MatrixRep};
use crate::error::{Error, Result};

/// `su(n)` with basis `X_kl = E_kl - E_lk`, `Y_kl = i(E_kl + E_lk)` for
/// `k < l` and `H_j = i(E_jj - E_{j+1,j+1})`. Labels are 1-based.
pub fn special_unitary(n: usize) -> Result<LieAlgebra> {
    if n < 2 {
        return Err(Error::Invalid("su(n) needs n >= 2".into()));
    }
    let mut re = Vec::new();
    let mut im = Vec::new();
    let mut labels = Vec::new();
    let z = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        for l in k + 1..n {
            let mut a = z.clone();
            a[(k, l)] = 1.0;
            a[(l, k)] = -1.0;
            re.push(a);
            im.push(z.clone());
            labels.push(format!("X{}{}", k + 1, l + 1));
            let mut s = z.clone();
            s[(k, l)] = 1.0;
            s[(l, k)] = 1.0;
            re.push(z.clone());
            im.push(s);
            labels.push(format!("Y{}{}", k + 1, l + 1));
        }
    }
    for j in 0..n - 1 {
        let mut h = z.clone();
        h[(j, j)] = 1.0;
        h[(j + 1, j + 1)] = -1.0;
        re.push(z.clone());
        im.push(h);
        labels.push(format!("H{}", j + 1));
    }
    from_matrices(&format!("su({n})"), labels, MatrixRep { re, im })
}

/// `so(n)` with basis `L_kl = E_kl - E_lk`, `k < l`, labels 1-based.
pub fn special_orthogonal(n: usize) -> Result<LieAlgebra> {
    if n < 3 {
        return Err(Error::Invalid("so(n) needs n >= 3".into()));
    }
    let mut re = Vec::new();
    let mut labels = Vec::new();
    for k in 0..n {
        for l in k + 1..n {
            let mut a = DMatrix::<f64>::zeros(n, n);
            a[(k, l)] = 1.0;
            a[(l, k)] = -1.0;
            re.push(a);
            labels.push(format!("L{}{}", k + 1, l + 1));
        }
    }
    let im = vec![DMatrix::zeros(n, n); re.len()];
    from_matrices(&format!("so({n})"), labels, MatrixRep { re, im })
}

/// Structure constants of a matrix basis under the commutator.
fn from_matrices(name: &str, labels: Vec<String>, rep: MatrixRep) -> Result<LieAlgebra> {
    let d = rep.re.len();
    let mut triplets = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let (ar, ai) = (&rep.re[i], &rep.im[i]);
            let (br, bi) = (&rep.re[j], &rep.im[j]);
            // (ar + i ai)(br + i bi) - (br + i bi)(ar + i ai)
            let cr = ar * br - ai * bi - (br * ar - bi * ai);
            let ci = ar * bi + ai * br - (br * ai + bi * ar);
            let c = rep.coordinates(&cr, &ci);
            for k in 0..d {
                let v = snap(c[k]);
                if v != 0.0 {
                    triplets.push((i, j, k, v));
                }
            }
        }
    }
    Ok(LieAlgebra::from_structure_constants(name, labels, &triplets)?.with_rep(rep))
}

/// Structure constants of the built-in bases are small rationals.
fn snap(x: f64) -> f64 {
    let r = (x * 6.0).round() / 6.0;
    if (x - r).abs() < 1e-10 {
        r
    } else {
        x
    }
}

/// How an involution of a Lie algebra is specified.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum InvolutionSpec {
    /// `X -> S X S` with `S = diag(signs)`, on a matrix algebra.
    DiagConjugation(Vec<f64>),
    /// `X -> conj(X)`, on a matrix algebra.
    ComplexConjugation,
    /// Dense matrix in the algebra basis, rows first.
    Matrix(Vec<Vec<f64>>),
    /// The involution stored with the algebra.
    Stored,
}

impl InvolutionSpec {
    /// Parse the compact text forms `diag_conj:[-1,-1,1]`, `complex_conj`
    /// and `stored`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "complex_conj" {
            return Ok(Self::ComplexConjugation);
        }
        if s == "stored" {
            return Ok(Self::Stored);
        }
        if let Some(rest) = s.strip_prefix("diag_conj:") {
            let signs: Vec<f64> = serde_json::from_str(rest)?;
            return Ok(Self::DiagConjugation(signs));
        }
        Err(Error::Invalid(format!("unknown involution spec '{s}'")))
    }

    /// Matrix of the involution in the algebra basis.
    pub fn matrix(&self, alg: &LieAlgebra) -> Result<DMatrix<f64>> {
        let n = alg.dim();
        match self {
            Self::Matrix(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Invalid("involution matrix has the wrong shape".into()));
                }
                Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
            Self::Stored => alg
                .stored_involution()
                .cloned()
                .ok_or_else(|| Error::Invalid("algebra carries no stored involution".into())),
            Self::DiagConjugation(signs) => {
                let rep = alg
                    .rep()
                    .ok_or_else(|| Error::Invalid("diag_conj needs a matrix algebra".into()))?;
                let m = rep.re[0].nrows();
                if signs.len() != m || signs.iter().any(|s| s.abs() != 1.0) {
                    return Err(Error::Invalid(format!("diag_conj needs {m} entries of +-1")));
                }
                let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(signs.clone()));
                Ok(image_matrix(alg, rep, |re, im| (&s * re * &s, &s * im * &s)))
            }
            Self::ComplexConjugation => {
                let rep = alg
                    .rep()
                    .ok_or_else(|| Error::Invalid("complex_conj needs a matrix algebra".into()))?;
                Ok(image_matrix(alg, rep, |re, im| (re.clone(), -im)))
            }
        }
    }
}

fn image_matrix<F>(alg: &LieAlgebra, rep: &MatrixRep, f: F) -> DMatrix<f64>
where
    F: Fn(&DMatrix<f64>, &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>),
{
    let n = alg.dim();
    let mut t = DMatrix::zeros(n, n);
    for j in 0..n {
        let (r, i) = f(&rep.re[j], &rep.im[j]);
        let c = rep.coordinates(&r, &i);
        for k in 0..n {
            t[(k, j)] = snap(c[k]);
        }
    }
    t
}

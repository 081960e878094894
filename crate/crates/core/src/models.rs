//! Ready-made symmetric spaces and subgroups used by the built-in scenarios
//! and the tests.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::lie::{special_orthogonal, special_unitary, InvolutionSpec};
use crate::symspace::SymmetricSpace;

/// `CP^2 = SU(3)/S(U(2)xU(1))` with base point `[e3]`.
pub fn complex_projective_plane() -> Result<Arc<SymmetricSpace>> {
    let a = special_unitary(3)?;
    let t = InvolutionSpec::DiagConjugation(vec![-1.0, -1.0, 1.0]).matrix(&a)?;
    Ok(Arc::new(SymmetricSpace::from_pair(a, t, 1.0)?))
}

/// `SU(3)/SO(3)`, rank two.
pub fn su3_so3() -> Result<Arc<SymmetricSpace>> {
    let a = special_unitary(3)?;
    let t = InvolutionSpec::ComplexConjugation.matrix(&a)?;
    Ok(Arc::new(SymmetricSpace::from_pair(a, t, 1.0)?))
}

/// `S^{n-1} = SO(n)/SO(n-1)` with base point `e_n`.
pub fn sphere(n: usize) -> Result<Arc<SymmetricSpace>> {
    let a = special_orthogonal(n)?;
    let mut signs = vec![1.0; n];
    signs[n - 1] = -1.0;
    let t = InvolutionSpec::DiagConjugation(signs).matrix(&a)?;
    Ok(Arc::new(SymmetricSpace::from_pair(a, t, 1.0)?))
}

/// Adapted-coordinate matrix of an involution given on the original algebra.
pub fn involution_adapted(space: &SymmetricSpace, spec: &InvolutionSpec) -> Result<DMatrix<f64>> {
    Ok(space.operator_to_adapted(&spec.matrix(space.algebra())?))
}

/// Adapted coordinates of the algebra element with the given label.
pub fn labelled(space: &SymmetricSpace, label: &str) -> DVector<f64> {
    let i = space.algebra().label_index(label).unwrap_or_else(|| panic!("no basis label {label}"));
    let mut v = DVector::zeros(space.dim_g());
    v[i] = 1.0;
    space.to_adapted(&v)
}

/// Adapted coordinates of a combination of labelled basis elements.
pub fn combination(space: &SymmetricSpace, terms: &[(&str, f64)]) -> DVector<f64> {
    terms.iter().fold(DVector::zeros(space.dim_g()), |acc, (l, c)| acc + labelled(space, l) * *c)
}

/// Columns of labelled basis elements, in adapted coordinates.
pub fn span_of(space: &SymmetricSpace, labels: &[&str]) -> DMatrix<f64> {
    let cols: Vec<_> = labels.iter().map(|l| labelled(space, l)).collect();
    crate::linalg::columns(space.dim_g(), &cols)
}

//! Real Lie algebras from structure constants, Cartan decompositions,
//! bracket closure of matrix sets and Haar-like sampling.

mod algebra;
mod builtin;
mod cartan;
mod closure;
mod group;

pub use algebra::{AlgebraDoc, LieAlgebra, MatrixRep};
pub use builtin::{special_orthogonal, special_unitary, InvolutionSpec};
pub use cartan::{CartanDecomposition, CartanResiduals};
pub use closure::{extend_closure, lie_closure, MatrixLieAlgebra};
pub use group::{haar_sample, GroupElement};

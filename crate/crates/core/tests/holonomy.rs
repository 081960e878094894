mod common;

use std::sync::Arc;

use common::*;
use equifocal::holonomy::*;
use equifocal::lie::lie_closure;
use equifocal::models;
use equifocal::orbits::*;
use nalgebra::{DMatrix, DVector};

fn rot(k: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    m[(i, j)] = -1.0;
    m[(j, i)] = 1.0;
    m
}

fn flat_orbit_in_su3_so3() -> OrbitGerm {
    // Isotropy orbit of SO(3) on SU(3)/SO(3) through a regular flat point.
    let s = models::su3_so3().unwrap();
    let off = models::combination(&s, &[("H1", 0.3), ("H2", 0.11)]);
    let k = s.k_basis();
    homogeneous_orbit_germ(Arc::clone(&s), &k, &off).unwrap()
}

#[test]
fn projected_curvature_vanishes_on_flat_normal_spaces() {
    let g = flat_orbit_in_su3_so3();
    assert_eq!(g.codim(), 2);
    assert!(project_curvature(&g).norm() < 1e-12);
    let s = models::sphere(4).unwrap();
    let z0 = s.p_unit(0) * 0.8;
    let e = srep_orbit_germ(s, &z0).unwrap();
    assert!(project_curvature(&e).norm() == 0.0);
}

#[test]
fn cp1_normal_plane_curvature_matches_matrix_oracle() {
    let g = cp1_in_cp2();
    let t = project_curvature(&g);
    assert!(t.residuals().max() < 1e-12);
    let (x13, y13) = su3_xy(0, 2);
    let k = su3_sectional(&x13, &y13);
    assert!((t.scalar_curvature() - 2.0 * k).abs() < 1e-12, "{} vs {}", t.scalar_curvature(), 2.0 * k);
    // The normal plane is a complex line: holomorphic curvature, the maximum.
    let (x12, _) = su3_xy(0, 1);
    assert!((k / su3_sectional(&x13, &x12) - 4.0).abs() < 1e-9);
}

#[test]
fn l_p_of_cp1_is_one_dimensional_and_monotone() {
    let g = cp1_in_cp2();
    let sampler = CurveSampler::default();
    let zero = build_l_p(&g, &sampler, 0, 1).unwrap();
    let full = build_l_p(&g, &sampler, 50, 1).unwrap();
    assert_eq!(full.algebra.dim(), 1);
    assert!(full.stabilization.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(full.stabilization.len(), 51);
    for x in zero.algebra.basis() {
        assert!(full.algebra.algebra.contains(x, 1e-8));
    }
    assert!(full.tensors.max_residual() < 1e-10);
}

#[test]
fn flat_germ_gives_trivial_l_p() {
    let g = flat_orbit_in_su3_so3();
    let l = build_l_p(&g, &CurveSampler::default(), 10, 3).unwrap();
    assert_eq!(l.algebra.dim(), 0);
}

#[test]
fn tensor_transport_round_trip() {
    let g = principal_in_cp2(0.4);
    let t0 = curvature_on(&g.family, &g.normal);
    let c = CurveSampler::default().sample_many(&g.family, 1, 8).remove(0);
    let there = normal_parallel_transport(&g.family, &g.point, &c, &g.normal, TransportMethod::Ode { step: 1e-2 })
        .unwrap();
    let back = normal_parallel_transport(
        &g.family,
        there.end_point(),
        &c.reversed(),
        there.end_frame(),
        TransportMethod::Ode { step: 1e-2 },
    )
    .unwrap();
    let psi = g.normal.transpose() * back.end_frame();
    let t1 = transport_tensor(&t0, &psi).unwrap();
    assert!(t1.distance(&t0) < 1e-8);
    // Scalar curvature is preserved by any isometry.
    let rot = DMatrix::from_row_slice(1, 1, &[-1.0]);
    assert!((transport_tensor(&t0, &rot).unwrap().scalar_curvature() - t0.scalar_curvature()).abs() < 1e-14);
}

#[test]
fn conjugation_equivariance_of_l_p() {
    let g = cp1_in_cp2();
    let sampler = CurveSampler::default();
    let here = build_l_p(&g, &sampler, 20, 5).unwrap();
    let c = sampler.sample_many(&g.family, 1, 99).remove(0);
    let t = normal_parallel_transport(&g.family, &g.point, &c, &g.normal, TransportMethod::ClosedForm).unwrap();
    let gq = g.at(t.end_point().clone());
    let there = build_l_p(&gq, &sampler, 20, 6).unwrap();
    let m = gq.normal.transpose() * t.end_frame();
    let conj = here.algebra.algebra.conjugated(&m);
    assert_eq!(there.algebra.dim(), conj.dim());
    assert!(conj.distance(&there.algebra.algebra) < 1e-4);
}

#[test]
fn normal_holonomy_samples() {
    // Loops in CP^1 rotate its normal plane.
    let g = cp1_in_cp2();
    let opts = HolonomyOptions { n_curves: 10, n_loops: 10, ..Default::default() };
    let phi = sample_normal_holonomy(&g, &opts).unwrap();
    assert_eq!(phi.algebra.dim(), 1);
    // Flat normal bundles: principal s-rep orbit and the Clifford-type torus.
    let s = models::su3_so3().unwrap();
    let z0 = models::combination(&s, &[("H1", 1.0), ("H2", 0.37)]);
    let e = srep_orbit_germ(s, &z0).unwrap();
    assert_eq!(sample_normal_holonomy(&e, &opts).unwrap().algebra.dim(), 0);
    let t = torus_in_s5(0.5, 0.6);
    assert_eq!(sample_normal_holonomy(&t, &opts).unwrap().algebra.dim(), 0);
    // No curves and no loops: only the curvature at p, which vanishes here.
    let none = HolonomyOptions { n_curves: 0, n_loops: 0, ..Default::default() };
    assert_eq!(sample_normal_holonomy(&e, &none).unwrap().algebra.dim(), 0);
}

#[test]
fn euclidean_hat_g_equals_normal_holonomy() {
    let s = models::su3_so3().unwrap();
    let z0 = models::combination(&s, &[("H1", 1.0), ("H2", 0.0)]);
    let e = srep_orbit_germ(s, &z0).unwrap();
    let opts = HolonomyOptions { n_curves: 10, n_loops: 10, ..Default::default() };
    let h = build_hat_g(&e, &opts).unwrap();
    assert_eq!(h.l_p.algebra.dim(), 0);
    assert_eq!(h.algebra.dim(), h.phi.algebra.dim());
    assert!(same_algebra(&h.algebra.algebra, &h.phi.algebra.algebra, 1e-8));
}

#[test]
fn hat_g_on_cp1_is_transitive_on_circles() {
    let g = cp1_in_cp2();
    let h = build_hat_g(&g, &HolonomyOptions::default()).unwrap();
    assert_eq!(h.algebra.dim(), 1);
    assert_eq!(h.decomposition.block_dims(), vec![0, 2]);
    assert!(h.decomposition.irreducible[1]);
    let xi = DVector::from_vec(vec![0.3, 0.0]);
    let angles: Vec<f64> = h.sample_group(400, 2).iter().map(|m| {
        let v = m * &xi;
        assert!((v.norm() - 0.3).abs() < 1e-12);
        v[1].atan2(v[0])
    }).collect();
    // Every arc of length pi/8 is hit.
    for i in 0..16 {
        let lo = -std::f64::consts::PI + i as f64 * std::f64::consts::PI / 8.0;
        assert!(angles.iter().any(|&a| a >= lo && a < lo + std::f64::consts::PI / 8.0));
    }
    let rep = h.report();
    assert_eq!(rep.dim_l_p, 1);
    assert!(rep.product_residual < 1e-8 && rep.phi_invariance_residual < 1e-6);
    serde_json::to_string(&rep).unwrap();
}

#[test]
fn point_orbit_hat_g_is_isotropy() {
    let s = cp2();
    let th = models::involution_adapted(&s, &equifocal::lie::InvolutionSpec::DiagConjugation(vec![-1.0, -1.0, 1.0])).unwrap();
    let g = hermann_orbit_germ(s, &th, &DVector::zeros(8)).unwrap();
    let h = build_hat_g(&g, &HolonomyOptions { n_curves: 0, n_loops: 0, ..Default::default() }).unwrap();
    // u(2) acting on C^2.
    assert_eq!(h.algebra.dim(), 4);
    assert_eq!(h.decomposition.block_dims(), vec![0, 4]);
    assert_eq!(h.decomposition.commutant_dims[1], 2);
}

#[test]
fn hat_g_product_structure_on_torus() {
    let t = torus_in_s5(0.5, 0.6);
    let h = build_hat_g(&t, &HolonomyOptions { n_curves: 10, n_loops: 5, ..Default::default() }).unwrap();
    // Constant curvature on the normal plane: so(2), no kernel.
    assert_eq!(h.algebra.dim(), 1);
    assert_eq!(h.decomposition.block_dims(), vec![0, 2]);
    assert!(h.product_residual < 1e-8);
}

#[test]
fn simons_keeps_invariant_tensor() {
    let t = AlgebraicCurvatureTensor::constant_curvature(3, 1.0);
    let so3 = lie_closure(3, &[rot(3, 0, 1), rot(3, 1, 2)]).unwrap();
    let s = simons_symmetrize(&t, &so3, 10_000, 4).unwrap();
    assert!(s.distance(&t) < 1e-3);
    let z = AlgebraicCurvatureTensor::zeros(3);
    assert_eq!(simons_symmetrize(&z, &so3, 10, 1).unwrap(), z);
}

#[test]
fn simons_averages_out_non_invariant_part() {
    // Curvature operator diag(1, 2, 3) is not invariant under rotations of
    // the (e1, e2) plane; the average replaces 2 and 3 by 5/2.
    let op = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
    let t = AlgebraicCurvatureTensor::from_curvature_operator(3, &op).unwrap();
    let so2 = lie_closure(3, &[rot(3, 0, 1)]).unwrap();
    let small = simons_symmetrize(&t, &so2, 100, 7).unwrap();
    let large = simons_symmetrize(&t, &so2, 10_000, 7).unwrap();
    let r_small = invariance_residual(&small, &so2, 64, 11);
    let r_large = invariance_residual(&large, &so2, 64, 11);
    assert!(r_large * 3.0 <= r_small, "{r_small} -> {r_large}");
    let exact_op = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.5, 2.5]));
    let exact = AlgebraicCurvatureTensor::from_curvature_operator(3, &exact_op).unwrap();
    assert!(large.distance(&exact) < 5e-2);
    assert!(large.residuals().max() < 1e-12);
}

#[test]
fn simons_closure_dimension_matches_group() {
    let op = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.0, 0.3, 2.0, 0.2, 0.0, 0.2, 1.5]);
    let t = AlgebraicCurvatureTensor::from_curvature_operator(3, &op).unwrap();
    let so3 = lie_closure(3, &[rot(3, 0, 1), rot(3, 1, 2)]).unwrap();
    let s = simons_symmetrize(&t, &so3, 4000, 1).unwrap();
    assert_eq!(tensor_algebra(&s).unwrap().dim(), so3.dim());
}

#[test]
fn simons_precondition() {
    // Zero sectional curvature on the rotated plane.
    let op = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 1.0]));
    let t = AlgebraicCurvatureTensor::from_curvature_operator(3, &op).unwrap();
    let so2 = lie_closure(3, &[rot(3, 0, 1)]).unwrap();
    let err = simons_symmetrize(&t, &so2, 10, 1).unwrap_err();
    assert!(err.to_string().contains("V_1"), "{err}");
}

//! Partial tubes, their parallel normal fields and the reconstruction check.

mod common;

use std::f64::consts::PI;

use common::*;
use equifocal::error::Error;
use equifocal::holonomy::{build_hat_g, project_curvature, HatG, HolonomyOptions};
use equifocal::lie::{haar_sample, lie_closure};
use equifocal::linalg;
use equifocal::models;
use equifocal::orbits::{holonomy_tube_sample, homogeneous_orbit_germ, OrbitGerm, TransportMethod};
use equifocal::tube::*;
use nalgebra::{DMatrix, DVector};

fn hat_g(germ: &OrbitGerm) -> HatG {
    build_hat_g(germ, &HolonomyOptions::default()).unwrap()
}

fn cp1_tube(r: f64) -> PartialTube {
    let germ = cp1_in_cp2();
    let g = hat_g(&germ);
    let xi = unit(germ.space(), "X13") * r;
    build_partial_tube(&germ, Some(&g), &xi, &TubeOptions::default()).unwrap()
}

fn flat_orbit_in_su3_so3() -> OrbitGerm {
    let s = models::su3_so3().unwrap();
    let off = models::combination(&s, &[("H1", 0.3), ("H2", 0.11)]);
    let k = s.k_basis();
    homogeneous_orbit_germ(s, &k, &off).unwrap()
}

/// A unit normal vector at the germ point from normal coordinates.
fn normal_dir(germ: &OrbitGerm, c: &[f64]) -> DVector<f64> {
    let v = germ.normal_vector(&DVector::from_column_slice(c));
    &v / v.norm()
}

#[test]
fn trivial_hat_g_gives_the_holonomy_tube() {
    let germ = flat_orbit_in_su3_so3();
    let g = hat_g(&germ);
    assert_eq!(g.algebra.algebra.dim(), 0);
    let xi = normal_dir(&germ, &[0.6, 0.8]) * (0.3 * germ.epsilon);
    let opts = TubeOptions { n_fibres: 4, ..TubeOptions::default() };
    let tube = build_partial_tube(&germ, Some(&g), &xi, &opts).unwrap();
    assert_eq!(tube.orbit_dim, 0);
    assert!(tube.principal);
    let reference = holonomy_tube_sample(&germ, &xi, &tube.curves, TransportMethod::ClosedForm).unwrap();
    for (fibre, (_, eta)) in tube.fibres[1..].iter().zip(&reference) {
        for s in &fibre.orbit_samples {
            assert!((s - &fibre.transported_xi).norm() < 1e-12);
        }
        assert!((&fibre.transported_xi - eta).norm() < 1e-10);
    }
}

#[test]
fn cp1_fibres_are_full_circles() {
    let r = 0.4;
    let germ = cp1_in_cp2();
    let g = hat_g(&germ);
    let xi = unit(germ.space(), "X13") * r;
    let opts = TubeOptions { n_group: 64, ..TubeOptions::default() };
    let tube = build_partial_tube(&germ, Some(&g), &xi, &opts).unwrap();
    assert_eq!(tube.orbit_dim, 1);
    assert_eq!(tube.fibre_dim(), 1);
    assert!(tube.principal && !tube.degenerate);
    assert!(tube.fibre_dims_constant());
    assert_eq!(tube.dim(), 3);
    assert_eq!(tube.codim(), 1);
    for f in &tube.fibres {
        let germ_q = germ.at(f.base_point.clone());
        let amb = tube.family().ambient_basis(&f.base_point);
        for s in &f.orbit_samples {
            assert!((s.norm() - r).abs() < 1e-6);
            let tangential = &germ_q.tangent * (germ_q.tangent.transpose() * s);
            assert!(tangential.norm() < 1e-8);
            assert!((s - &amb * (amb.transpose() * s)).norm() < 1e-8);
        }
    }
    // The so(2) orbit at p covers the circle: every angular bin is hit.
    let base = &tube.fibres[0];
    let mut bins = [false; 8];
    for s in &base.orbit_samples {
        let c = germ.normal_coords(s);
        let a = c[1].atan2(c[0]).rem_euclid(2.0 * PI);
        bins[((a / (2.0 * PI) * 8.0) as usize).min(7)] = true;
    }
    assert!(bins.iter().all(|b| *b), "{bins:?}");
}

#[test]
fn zero_xi_is_degenerate_and_vacuously_equifocal() {
    let germ = cp1_in_cp2();
    let g = hat_g(&germ);
    let xi = DVector::zeros(germ.dim_g());
    let tube = build_partial_tube(&germ, Some(&g), &xi, &TubeOptions::default()).unwrap();
    assert!(tube.degenerate && !tube.principal);
    assert_eq!(tube.fibre_dim(), 0);
    assert_eq!(tube.dim(), germ.dim());
    for (iso, f) in tube.isometries().iter().zip(tube.fibres.iter().flat_map(|f| std::iter::repeat(f).take(tube.group.len()))) {
        assert!(tube.family().distance(&tube.point(iso), &f.base_point) < 1e-12);
    }
    let rep = verify_equifocal(&tube, &VerifyOptions::default()).unwrap();
    assert!(rep.degenerate && rep.abelian && rep.globally_flat && rep.constant_focal);
    let h = reconstruct_check(&tube, &germ, &HausdorffOptions { samples: 40, ..HausdorffOptions::default() }).unwrap();
    assert!(h.hausdorff_forward.value < 1e-8 && h.hausdorff_backward.value < 1e-8, "{h:?}");
    assert!(h.pass);
}

#[test]
fn tube_errors() {
    let germ = cp1_in_cp2();
    let g = hat_g(&germ);
    let xi = unit(germ.space(), "X13") * germ.epsilon;
    assert!(matches!(
        build_partial_tube(&germ, Some(&g), &xi, &TubeOptions::default()),
        Err(Error::TubeRadius { .. })
    ));
    let xi = unit(germ.space(), "X13") * 0.3;
    assert!(matches!(build_partial_tube(&germ, None, &xi, &TubeOptions::default()), Err(Error::Dependency(_))));
}

#[test]
fn codimension_one_section_is_the_radial_line() {
    let tube = cp1_tube(0.4);
    for iso in tube.isometries().iter().step_by(7) {
        let sec = tube_normal_section(&tube, iso).unwrap();
        assert_eq!(sec.dim, 1);
        assert!(sec.abelian);
        let eta = &iso.map * &tube.xi_coords;
        let a = sec.basis.column(0).into_owned();
        assert!((a.dot(&eta).abs() - eta.norm()).abs() < 1e-10);
    }
}

#[test]
fn point_focal_rank_two_section_is_abelian() {
    let germ = point_in_su3_so3();
    assert_eq!(germ.dim(), 0);
    let g = hat_g(&germ);
    // A regular direction in the flat spanned by H1, H2.
    let s = germ.space();
    let eta = models::combination(s, &[("H1", 0.3), ("H2", 0.11)]);
    let xi = &eta * (0.5 * germ.epsilon / eta.norm());
    let tube = build_partial_tube(&germ, Some(&g), &xi, &TubeOptions { n_group: 6, ..TubeOptions::default() }).unwrap();
    assert!(tube.principal);
    assert_eq!(tube.codim(), 2);
    for iso in tube.isometries() {
        let sec = tube_normal_section(&tube, &iso).unwrap();
        assert_eq!(sec.dim, 2);
        assert!(sec.bracket_residual <= 1e-8 && sec.curvature_residual <= 1e-8, "{sec:?}");
    }
}

#[test]
fn section_needs_a_principal_tube() {
    let germ = cp1_in_cp2();
    let g = hat_g(&germ);
    let tube = build_partial_tube(&germ, Some(&g), &DVector::zeros(germ.dim_g()), &TubeOptions::default()).unwrap();
    let iso = tube.isometry(0, 0);
    assert!(matches!(tube_normal_section(&tube, &iso), Err(Error::Precondition(_))));
}

#[test]
fn parallel_field_at_identity_is_the_jacobi_value() {
    let tube = cp1_tube(0.4);
    let germ = &tube.germ;
    let nu = &tube.xi_coords * 0.5;
    let v = parallel_normal_field(&tube, &nu, &tube.isometry(0, 0)).unwrap();
    // Along the radial geodesic the field is the velocity scaled, transported.
    let eta = germ.normal_vector(&tube.xi_coords);
    let expected = tube.family().geodesic_transport(&eta) * germ.normal_vector(&nu);
    assert!((&v - &expected).norm() < 1e-10);
    let outside = DVector::from_column_slice(&[-tube.xi_coords[1], tube.xi_coords[0]]);
    assert!(matches!(
        parallel_normal_field(&tube, &outside, &tube.isometry(0, 0)),
        Err(Error::NotInSubspace { .. })
    ));
}

#[test]
fn focal_pointing_field_collapses_the_tube_onto_m() {
    let tube = cp1_tube(0.4);
    let nu = -&tube.xi_coords;
    let fam = tube.family();
    for iso in tube.isometries() {
        let x = tube.point(&iso);
        let v = parallel_normal_field(&tube, &nu, &iso).unwrap();
        let y = fam.exp_at(&x, &v);
        assert!(fam.metric_distance(&y, &iso.base) < 1e-6);
    }
}

#[test]
fn parallel_field_has_no_normal_derivative_along_a_fibre() {
    // The Levi-Civita derivative is the projection of the derivative in `g`
    // coordinates onto the tangent space, so the normal connection is its
    // projection onto the image normal space.
    let tube = cp1_tube(0.4);
    let nu = &tube.xi_coords * 0.7;
    let x = &tube.algebra.basis[0];
    let h = 1e-4;
    for f in 0..tube.fibres.len() {
        let base = tube.isometry(f, 3);
        let at = |u: f64| FrameIsometry { map: &base.map * linalg::expm(&(x * u)), ..base.clone() };
        let vm = parallel_normal_field(&tube, &nu, &at(-h)).unwrap();
        let vp = parallel_normal_field(&tube, &nu, &at(h)).unwrap();
        let n0 = tube.normal_frame(&base.map);
        let dv = (&vp - &vm) / (2.0 * h);
        assert!((n0.transpose() * dv).norm() < 1e-4);
    }
}

#[test]
fn omega_identity_and_focal_endpoint() {
    let tube = cp1_tube(0.4);
    let id = omega_projection(&tube, &tube.xi_coords.clone()).unwrap();
    assert!(id.identity);
    assert_eq!(id.image_orbit_dim, id.source_orbit_dim);
    for (a, b) in &id.pairs {
        assert!((a - b).norm() < 1e-14);
    }
    // Projecting onto the focal manifold M itself.
    let zero = DVector::zeros(2);
    let om = omega_projection(&tube, &zero).unwrap();
    assert_eq!((om.source_orbit_dim, om.image_orbit_dim), (1, 0));
    assert!(om.pairs.iter().all(|(_, b)| b.norm() < 1e-14));
    // Outward to the antipodal focal orbit the orbit dimension is kept.
    let far = &tube.xi_coords * (cp2_diameter() / 0.4);
    let om = omega_projection(&tube, &far).unwrap();
    assert_eq!(om.image_orbit_dim, 1);
    // rho - xi must lie in the section.
    let off = DVector::from_column_slice(&[-tube.xi_coords[1], tube.xi_coords[0]]);
    assert!(omega_projection(&tube, &(&tube.xi_coords + off)).is_err());
}

#[test]
fn rank_additivity_on_cp2_focal_radii() {
    let r = 0.4;
    let tube = cp1_tube(r);
    let dir = &tube.xi_coords / r;
    // Inward focal point: M itself, one collapsing fibre direction.
    let inner = rank_additivity(&tube, &DVector::zeros(2)).unwrap();
    assert_eq!((inner.tube_kernel, inner.omega_kernel, inner.base_kernel), (1, 1, 0), "{inner:?}");
    assert!(inner.holds);
    assert_eq!(inner.tube_dim, 3);
    // Outward focal point at the cut locus of the germ point.
    let outer = rank_additivity(&tube, &(&dir * cp2_diameter())).unwrap();
    assert_eq!((outer.tube_kernel, outer.omega_kernel, outer.base_kernel), (3, 0, 3), "{outer:?}");
    assert!(outer.holds);
    // A regular point: every kernel is trivial.
    let regular = rank_additivity(&tube, &(&dir * 1.0)).unwrap();
    assert_eq!((regular.tube_kernel, regular.omega_kernel, regular.base_kernel), (0, 0, 0));
}

#[test]
fn cp1_tube_is_equifocal() {
    let tube = cp1_tube(0.4);
    let rep = verify_equifocal(&tube, &VerifyOptions::default()).unwrap();
    assert!(rep.abelian && rep.globally_flat && rep.constant_focal, "{rep:#?}");
    let w = &rep.worst_residuals;
    for m in [&w.bracket, &w.curvature, &w.well_definedness, &w.normal_space, &w.loop_holonomy, &w.parallel_field] {
        assert!(m.pass() && m.value <= 1e-4, "{w:#?}");
    }
    assert!(rep.loops_checked > 0);
    assert_eq!(rep.normal_rank_mismatches, 0);
    assert!(rep.failing_probe.is_none());
}

#[test]
fn sphere_codimension_two_tube_is_not_equifocal() {
    let germ = torus_in_s5(0.5, 0.6);
    let g = hat_g(&germ);
    assert_eq!(g.algebra.algebra.dim(), 1);
    let xi = normal_dir(&germ, &[1.0, 0.3]) * (0.5 * germ.epsilon);
    let tube = build_partial_tube(&germ, Some(&g), &xi, &TubeOptions::default()).unwrap();
    assert_eq!(tube.codim(), 1);
    let rep = verify_equifocal(&tube, &VerifyOptions::default()).unwrap();
    assert!(!rep.constant_focal);
    let probe = rep.failing_probe.expect("a failing probe is logged");
    assert!(!probe.pass);
}

#[test]
fn cp1_tube_reconstructs_the_principal_orbit() {
    let r = 0.4;
    let tube = cp1_tube(r);
    let h = reconstruct_check(&tube, &principal_in_cp2(r), &HausdorffOptions::default()).unwrap();
    assert!(h.pass, "{h:#?}");
    assert_eq!((h.tube_dim, h.reference_dim), (3, 3));
    assert!(h.samples_tube >= 200 && h.samples_reference >= 200);
    // A different radius is detected.
    let h = reconstruct_check(&tube, &principal_in_cp2(r + 0.05), &HausdorffOptions { samples: 30, ..HausdorffOptions::default() }).unwrap();
    assert!(!h.pass);
    assert!(h.hausdorff_forward.value > 1e-2);
}

#[test]
fn point_tube_is_the_distance_sphere() {
    let germ = point_in_cp2();
    let g = hat_g(&germ);
    let xi = unit(germ.space(), "X13") * 0.5;
    let tube = build_partial_tube(&germ, Some(&g), &xi, &TubeOptions::default()).unwrap();
    assert_eq!(tube.dim(), 3);
    let s = std::sync::Arc::clone(&germ.family.space);
    let k = s.k_basis();
    let reference = homogeneous_orbit_germ(s, &k, &xi).unwrap();
    let h = reconstruct_check(&tube, &reference, &HausdorffOptions::default()).unwrap();
    assert!(h.pass, "{h:#?}");
}

/// Distance from `v` to the orbit of `alg` through `start`, refined by
/// least squares over the algebra coordinates.
fn orbit_distance(alg: &equifocal::lie::MatrixLieAlgebra, start: &DMatrix<f64>, eta: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let f = |c: &DVector<f64>| {
        let mut x = DMatrix::zeros(alg.space_dim, alg.space_dim);
        for (b, t) in alg.basis.iter().zip(c.iter()) {
            x += b * *t;
        }
        linalg::expm(&x) * start * eta - v
    };
    equifocal::fit::least_squares(f, DVector::zeros(alg.dim())).1
}

/// Sampled distance from `v` to the orbit through `eta`: the three nearest
/// samples seed least-squares refinements.
fn sampled_orbit_distance(
    alg: &equifocal::lie::MatrixLieAlgebra,
    samples: &[DMatrix<f64>],
    eta: &DVector<f64>,
    v: &DVector<f64>,
) -> f64 {
    let mut d: Vec<(f64, usize)> = samples.iter().enumerate().map(|(i, g)| ((g * eta - v).norm(), i)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0));
    d.iter().take(3).map(|(_, i)| orbit_distance(alg, &samples[*i], eta, v)).fold(f64::INFINITY, f64::min)
}

#[test]
fn curvature_endomorphisms_suffice_on_focal_manifolds() {
    for germ in [cp1_in_cp2(), point_in_cp2()] {
        let g = hat_g(&germ);
        let ends = project_curvature(&germ).endomorphisms();
        let w = lie_closure(germ.codim(), &ends).unwrap();
        assert_eq!(w.dim(), g.algebra.algebra.dim());
        let mut eta = DVector::from_element(germ.codim(), 0.0);
        eta[0] = 0.3;
        let gs = g.sample_group(200, 11);
        let ws: Vec<DMatrix<f64>> = haar_sample(&w, 200, 12).into_iter().map(|x| x.matrix).collect();
        for (a, b) in gs.iter().zip(&ws).take(40) {
            assert!(sampled_orbit_distance(&w, &ws, &eta, &(a * &eta)) < 1e-5);
            assert!(sampled_orbit_distance(&g.algebra.algebra, &gs, &eta, &(b * &eta)) < 1e-5);
        }
    }
}

#[test]
fn fibres_built_at_the_endpoint_match_transported_fibres() {
    let tube = cp1_tube(0.4);
    let germ = &tube.germ;
    for f in tube.fibres.iter().skip(1).take(3) {
        let germ_q = germ.at(f.base_point.clone());
        let g_q = hat_g(&germ_q);
        let eta_q = germ_q.normal_coords(&f.transported_xi);
        let direct: Vec<DVector<f64>> =
            g_q.sample_group(48, 5).iter().map(|g| germ_q.normal_vector(&(g * &eta_q))).collect();
        // Every directly built sample lies on the transported orbit and back.
        let on = |v: &DVector<f64>, set: &[DVector<f64>]| {
            let c = germ_q.normal_coords(v);
            let start = set.iter().map(|s| germ_q.normal_coords(s)).min_by(|a, b| (a - &c).norm().total_cmp(&(b - &c).norm())).unwrap();
            let r = start.norm();
            // Both orbits are circles of radius |xi| in the same normal plane.
            (c.norm() - r).abs()
        };
        for v in &direct {
            assert!(on(v, &f.orbit_samples) < 1e-5);
        }
        for v in &f.orbit_samples {
            assert!(on(v, &direct) < 1e-5);
        }
        let span_t = linalg::orthonormal_span(&linalg::columns(germ.dim_g(), &f.orbit_samples));
        let span_d = linalg::orthonormal_span(&linalg::columns(germ.dim_g(), &direct));
        assert_eq!(span_t.ncols(), span_d.ncols());
        assert!((&span_t * span_t.transpose() - &span_d * span_d.transpose()).norm() < 1e-5);
    }
}

#[test]
fn report_serializes() {
    let tube = cp1_tube(0.4);
    let rep = tube.report(None, None);
    let js = serde_json::to_value(&rep).unwrap();
    assert_eq!(js["fibre_dim"], 1);
    assert_eq!(js["codim"], 1);
    assert!(js["equifocal"].is_null());
    let sec = tube_normal_section(&tube, &tube.isometry(0, 0)).unwrap();
    assert!(serde_json::to_string(&sec).unwrap().contains("bracket_residual"));
}

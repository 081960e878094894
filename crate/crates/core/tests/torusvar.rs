//! Subtorus decisions, rigidity of subtorus families, and isometries that
//! carry normal tori.

mod common;

use std::f64::consts::PI;

use common::*;
use equifocal::error::Error;
use equifocal::models;
use equifocal::orbits::{homogeneous_orbit_germ, srep_orbit_germ, OrbitCurve, OrbitGerm, Segment};
use equifocal::torusvar::*;
use nalgebra::{DMatrix, DVector};

#[test]
fn span_of_a_basis_vector_is_a_subtorus() {
    let lattice = DMatrix::<f64>::identity(3, 3);
    let r = subtorus_test(&lattice, &cols(&[&[1.0, 0.0, 0.0]]), DENOMINATOR_BOUND).unwrap();
    assert!(r.is_subtorus());
    assert_eq!(r.rational_basis.unwrap(), vec![vec![1, 0, 0]]);
}

#[test]
fn irrational_slope_is_not_a_subtorus() {
    let lattice = DMatrix::<f64>::identity(2, 2);
    let r = subtorus_test(&lattice, &cols(&[&[1.0, 2f64.sqrt()]]), DENOMINATOR_BOUND).unwrap();
    assert_eq!(r.verdict, SubtorusVerdict::NotSubtorus);
    let w = r.witness.unwrap();
    assert!((w.value - 2f64.sqrt()).abs() < 1e-12 || (w.value - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    assert!(r.rational_basis.is_none());
}

#[test]
fn integer_combination_plane_matches_exact_row_reduction() {
    // span{x1 + 2 x3, x2} for a skewed lattice of Z^3.
    let lattice = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.1, 1.0, 0.4, 0.0, -0.5, 1.2]);
    let coeffs = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 2.0, 0.0]);
    let r = subtorus_test(&lattice, &(&lattice * coeffs), DENOMINATOR_BOUND).unwrap();
    assert!(r.is_subtorus());
    let basis = r.rational_basis.unwrap();
    assert!(same_rational_span(&basis, &[vec![1, 0, 2], vec![0, 1, 0]]));
    assert!(r.span_residual < 1e-10);
}

#[test]
fn near_fraction_with_large_denominator_is_inconclusive() {
    let lattice = DMatrix::<f64>::identity(2, 2);
    // Within rounding of 1/999983, a denominator too large to certify.
    let x = 1.0 / 999_983.0 + 5e-15;
    let r = subtorus_test(&lattice, &cols(&[&[1.0, x]]), DENOMINATOR_BOUND).unwrap();
    assert_eq!(r.verdict, SubtorusVerdict::Inconclusive);
    assert!(r.rational_basis.is_none() && r.witness.is_some());
    assert_eq!(r.common_denominator, CommonDenominator::Found(999_983));
    // The same denominator without the offset is certified.
    let r = subtorus_test(&lattice, &cols(&[&[999_983.0, 1.0]]), DENOMINATOR_BOUND).unwrap();
    assert!(r.is_subtorus());
    // pi is decided at both bounds.
    for bound in [100, DENOMINATOR_BOUND] {
        let r = subtorus_test(&lattice, &cols(&[&[1.0, PI]]), bound).unwrap();
        assert_eq!(r.verdict, SubtorusVerdict::NotSubtorus);
    }
}

#[test]
fn inconclusive_entries_without_a_common_denominator_are_ruled_out() {
    // Each entry alone sits within rounding of a fraction with a large prime
    // denominator; no single denominator up to the bound clears both.
    let lattice = DMatrix::<f64>::identity(3, 3);
    let x = 1.0 / 999_983.0 + 5e-15;
    let y = 1.0 / 999_979.0 + 5e-15;
    let r = subtorus_test(&lattice, &cols(&[&[1.0, x, y]]), DENOMINATOR_BOUND).unwrap();
    assert!(matches!(r.witness.unwrap().fit, RationalFit::Inconclusive { .. }));
    assert_eq!(r.common_denominator, CommonDenominator::Absent);
    assert_eq!(r.verdict, SubtorusVerdict::NotSubtorus);
    // Decided entries skip the search.
    let r = subtorus_test(&lattice, &cols(&[&[1.0, 0.5, 0.25]]), DENOMINATOR_BOUND).unwrap();
    assert_eq!(r.common_denominator, CommonDenominator::NotSearched);
}

#[test]
fn dependent_lattice_is_rejected() {
    let lattice = cols(&[&[1.0, 0.0], &[2.0, 0.0]]);
    assert!(matches!(subtorus_test(&lattice, &cols(&[&[1.0, 0.0]]), DENOMINATOR_BOUND), Err(Error::NotLattice(_))));
}

#[test]
fn seeded_instances_are_decided_correctly() {
    for inst in subtorus_instances(0x5eed, 50) {
        let r = subtorus_test(&inst.lattice, &inst.plane(), DENOMINATOR_BOUND).unwrap();
        if inst.rational {
            assert!(r.is_subtorus(), "{:?}", inst.integer_rows);
            assert!(same_rational_span(r.rational_basis.as_ref().unwrap(), &inst.integer_rows));
        } else {
            assert_eq!(r.verdict, SubtorusVerdict::NotSubtorus, "{} {:?}", inst.coefficients, r.witness);
        }
    }
}

fn rigid_options() -> RigidityOptions {
    RigidityOptions::default()
}

#[test]
fn constant_family_is_rigid() {
    let lattice = DMatrix::<f64>::identity(3, 3);
    let plane = cols(&[&[1.0, 0.0, 2.0], &[0.0, 1.0, 0.0]]);
    let times: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
    let fam = TorusFamily::new(times, &vec![plane; 20], None).unwrap();
    let r = lattice_rigidity_check(&lattice, &fam, &rigid_options()).unwrap();
    assert!(r.constant);
    assert!(r.max_angle.value < 1e-12);
}

#[test]
fn jumping_rational_family_is_flagged_not_smooth() {
    let lattice = DMatrix::<f64>::identity(2, 2);
    let times: Vec<f64> = (0..10).map(|i| i as f64 * 0.01).collect();
    let planes: Vec<_> = (0..10).map(|i| cols(&[&[1.0, i as f64]])).collect();
    let fam = TorusFamily::new(times, &planes, None).unwrap();
    assert!(matches!(lattice_rigidity_check(&lattice, &fam, &rigid_options()), Err(Error::NotSmooth(_))));
}

#[test]
fn smooth_family_through_subtori_at_every_sample_is_constant() {
    // E(t) = rotation by 0.3 sin(pi t / h) of a rational plane: smooth in t and
    // rational at every sample t = k h, where it equals E(0).
    let h = 0.05;
    let lattice = DMatrix::<f64>::identity(3, 3);
    let base = cols(&[&[1.0, 0.0, 2.0], &[0.0, 1.0, 0.0]]);
    let times: Vec<f64> = (0..21).map(|i| i as f64 * h).collect();
    let planes: Vec<_> = times
        .iter()
        .map(|t| {
            let a = 0.3 * (PI * t / h).sin();
            let rot = DMatrix::from_row_slice(3, 3, &[a.cos(), -a.sin(), 0.0, a.sin(), a.cos(), 0.0, 0.0, 0.0, 1.0]);
            rot * &base
        })
        .collect();
    let fam = TorusFamily::new(times, &planes, None).unwrap();
    let r = lattice_rigidity_check(&lattice, &fam, &rigid_options()).unwrap();
    assert!(r.constant, "{r:?}");
}

#[test]
fn irrational_members_violate_the_precondition() {
    let lattice = DMatrix::<f64>::identity(2, 2);
    let times: Vec<f64> = (0..10).map(|i| i as f64 * 0.01).collect();
    let planes: Vec<_> = times.iter().map(|t| cols(&[&[1.0, t * 2f64.sqrt()]])).collect();
    let fam = TorusFamily::new(times, &planes, None).unwrap();
    assert!(matches!(lattice_rigidity_check(&lattice, &fam, &rigid_options()), Err(Error::Precondition(_))));
}

#[test]
fn moving_basis_gives_orthogonal_comparison_maps() {
    let times: Vec<f64> = (0..12).map(|i| i as f64 * 0.1).collect();
    let planes: Vec<_> = times
        .iter()
        .map(|t| cols(&[&[t.cos(), t.sin(), 0.0, 0.0], &[0.0, 0.0, (2.0 * t).cos(), (2.0 * t).sin()]]))
        .collect();
    let fam = TorusFamily::new(times, &planes, None).unwrap();
    for i in 0..fam.len() {
        for j in 0..fam.len() {
            assert!(fam.isometry_residual(i, j) < 1e-8);
        }
    }
    // Consecutive bases move by O(step).
    assert!(fam.max_rate() < 2.5);
}

#[test]
fn non_abelian_planes_are_rejected_in_a_symmetric_space() {
    let s = cp2();
    let plane = cols(&[unit(&s, "X13").as_slice(), unit(&s, "Y13").as_slice()]);
    assert!(matches!(TorusFamily::new(vec![0.0], &[plane], Some(&s)), Err(Error::Precondition(_))));
    let s = models::su3_so3().unwrap();
    let flat = models::span_of(&s, &["H1", "H2"]);
    assert!(TorusFamily::new(vec![0.0], &[flat], Some(&s)).unwrap().abelian_residual.unwrap() < 1e-12);
}

fn su3_srep() -> OrbitGerm {
    let s = models::su3_so3().unwrap();
    let z0 = models::combination(&s, &[("H1", 1.0), ("H2", 0.37)]);
    srep_orbit_germ(s, &z0).unwrap()
}

fn one_segment(germ: &OrbitGerm, col: usize, length: f64) -> (OrbitCurve, DVector<f64>) {
    let m = germ.family.h.column(col).into_owned();
    (OrbitCurve::new(vec![Segment { generator: m.clone(), length }]), m)
}

#[test]
fn srep_isometries_induce_normal_transport() {
    let germ = su3_srep();
    for col in 0..germ.family.dim_h() {
        let (curve, m) = one_segment(&germ, col, 1.0);
        let sp = &germ.family.space;
        let r = isometry_transport_check(&germ, &curve, |t| sp.exp_ad(&(&m * t)), &TransportCheckOptions::default()).unwrap();
        assert!(r.pass && r.residual.value <= 1e-6, "{r:?}");
        assert!(r.mapping_residual < 1e-10);
    }
}

#[test]
fn zero_length_curve_has_zero_residual() {
    let germ = su3_srep();
    let (curve, m) = one_segment(&germ, 0, 0.0);
    let sp = &germ.family.space;
    let r = isometry_transport_check(&germ, &curve, |t| sp.exp_ad(&(&m * t)), &TransportCheckOptions::default()).unwrap();
    assert_eq!(r.residual.value, 0.0);
}

#[test]
fn flat_orbit_isometries_induce_normal_transport() {
    let s = models::su3_so3().unwrap();
    let off = models::combination(&s, &[("H1", 0.3), ("H2", 0.11)]);
    let k = s.k_basis();
    let germ = homogeneous_orbit_germ(s, &k, &off).unwrap();
    let (curve, m) = one_segment(&germ, 1, 0.8);
    let sp = &germ.family.space;
    let r = isometry_transport_check(&germ, &curve, |t| sp.exp_ad(&(&m * t)), &TransportCheckOptions::default()).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn isometries_need_not_induce_transport_without_abelian_normal_tori() {
    // CP^1 in CP^2 has a nontrivial normal holonomy, so the group action
    // rotates against the normal connection.
    let germ = cp1_in_cp2();
    let sp = &germ.family.space;
    let worst = (0..germ.family.dim_h())
        .map(|col| {
            let (curve, m) = one_segment(&germ, col, 1.0);
            isometry_transport_check(&germ, &curve, |t| sp.exp_ad(&(&m * t)), &TransportCheckOptions::default())
                .unwrap()
                .residual
                .value
        })
        .fold(0.0, f64::max);
    assert!(worst > 1e-2);
}

#[test]
fn isometry_curve_must_map_normal_spaces() {
    let germ = su3_srep();
    let (curve, _) = one_segment(&germ, 0, 1.0);
    let n = germ.dim_g();
    let r = isometry_transport_check(&germ, &curve, |_| DMatrix::identity(n, n), &TransportCheckOptions::default());
    assert!(matches!(r, Err(Error::NotInSubspace { .. })));
}

#[test]
fn transport_residual_shrinks_with_the_step() {
    // On the s-representation orbit the isometries give the exact transport,
    // so the residual is the ODE error alone.
    let germ = su3_srep();
    let (curve, m) = one_segment(&germ, 0, 1.0);
    let sp = &germ.family.space;
    let c = transport_convergence(&germ, &curve, |t| sp.exp_ad(&(&m * t)), 0.2).unwrap();
    assert!(c.coarse < 1e-12 || (c.fine < c.coarse && c.order >= 1.0), "{c:?}");
}

#[test]
fn killing_fields_normal_at_the_base_are_normal_along_the_flat() {
    let s = models::su3_so3().unwrap();
    let flat = models::span_of(&s, &["H1", "H2"]);
    let e = equifocal::linalg::orthonormal_span(&flat);
    let mut r = equifocal::rng::seeded(3);
    for _ in 0..4 {
        // k components vanish at the base point; p components orthogonal to E
        // are normal there.
        let g = equifocal::rng::gaussian_vector(&mut r, s.dim_g());
        let z = &g - &e * (e.transpose() * &g);
        let rep = killing_normality(&s, &flat, &z, 64, 9).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
    let h1 = unit(&s, "H1");
    assert!(matches!(killing_normality(&s, &flat, &h1, 8, 9), Err(Error::Precondition(_))));
}

#[test]
fn killing_normality_agrees_with_finite_differences() {
    // The induced field d/dt exp(tz) y, evaluated by differencing theta.
    let s = models::su3_so3().unwrap();
    let flat = models::span_of(&s, &["H1", "H2"]);
    let e = equifocal::linalg::orthonormal_span(&flat);
    let mut r = equifocal::rng::seeded(5);
    let g = equifocal::rng::gaussian_vector(&mut r, s.dim_g());
    let z = &g - &e * (e.transpose() * &g);
    let h = 1e-5;
    for a in [DVector::from_vec(vec![0.4, -1.1]), DVector::from_vec(vec![2.0, 0.7])] {
        let y = s.exp_at(&s.base_point(), &(&e * a));
        let th = |t: f64| s.act(&s.exp_ad(&(&z * t)), &y).theta;
        let v = s.velocity_from_theta(&y, &((th(h) - th(-h)) / (2.0 * h)));
        let tangential = e.transpose() * &v;
        assert!(tangential.norm() < 1e-6, "{}", tangential.norm());
        assert!(v.norm() > 1e-3);
    }
}

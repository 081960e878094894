//! Scenario pipeline and the versioned report it produces.
//!
//! Every floating-point value in the report is a `{value, tolerance}` pair.
//! Measured quantities carry the bound they are checked against; inputs
//! echoed back and derived radii carry the accuracy they were computed to.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::{Check, Scenario};
use crate::error::Result;
use crate::focal::{default_scan_limit, focal_profile, preserves_focal_structure, FocalProfile, FocalProbe};
use crate::holonomy::{build_hat_g, HatG, HolonomyOptions};
use crate::orbits::{commutator_loop, loop_holonomy, CurveSampler, OrbitGerm, TransportMethod};
use crate::rng;
use crate::tol::{self, Measured};
use crate::tube::{
    build_partial_tube, rank_additivity, reconstruct_check, verify_equifocal, EquifocalReport, HausdorffOptions,
    HausdorffReport, PartialTube, RankAdditivity, TubeOptions, VerifyOptions, WorstResiduals,
};

/// Identifier of the report layout; bumped on any incompatible change.
pub const REPORT_SCHEMA: &str = "equifocal-report/1";

/// Tolerance attached to echoed inputs, which are exact.
const EXACT: f64 = 0.0;

#[derive(Clone, Debug, Serialize)]
pub struct GermSummary {
    pub space: String,
    pub action: String,
    pub ambient_dim: usize,
    pub dim: usize,
    pub codim: usize,
    /// Half the smallest sampled first focal distance; absent when no
    /// focal point was found.
    pub epsilon: Option<Measured>,
    pub shape_asymmetry: Measured,
    /// Finite-difference certificate of the second fundamental form.
    pub shape_certificate: Measured,
    pub assumptions: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockSummary {
    pub dim: usize,
    pub trivial: bool,
    pub irreducible: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HatGSummary {
    pub dim_l_p: usize,
    pub dim_phi: usize,
    pub dim_hat_g: usize,
    pub blocks: Vec<BlockSummary>,
    pub stabilized_at: usize,
    pub phi_invariance_residual: Measured,
    pub product_residual: Measured,
    pub closure_residual: Measured,
}

#[derive(Clone, Debug, Serialize)]
pub struct EventSummary {
    pub radius: Measured,
    pub multiplicity: usize,
    /// `sigma_min / sigma_max` of the normal exponential at the radius.
    pub relative_singular: Measured,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileSummary {
    pub scan_limit: Measured,
    pub steps: usize,
    pub events: Vec<EventSummary>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeSummary {
    /// Probe vector in normal coordinates.
    pub eta: Vec<Measured>,
    pub multiplicity_source: usize,
    pub multiplicity_image: usize,
    pub relative_singular_image: Measured,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquifocalSummary {
    pub abelian: bool,
    pub globally_flat: bool,
    pub constant_focal: bool,
    pub worst_residuals: WorstResiduals,
    pub isometries_checked: usize,
    pub loops_checked: usize,
    pub loops_skipped: usize,
    pub normal_rank_mismatches: usize,
    pub profile_mismatches: usize,
    pub failing_probe: Option<ProbeSummary>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TubeSummary {
    pub xi_norm: Measured,
    pub principal: bool,
    pub degenerate: bool,
    pub dim: usize,
    pub fibre_dim: usize,
    pub codim: usize,
    pub equifocal: Option<EquifocalSummary>,
    pub reconstruction: Option<HausdorffReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RankSummary {
    pub rho_radius: Measured,
    pub tube_kernel: usize,
    pub omega_kernel: usize,
    pub base_kernel: usize,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PreservationSummary {
    pub group_maps: usize,
    pub loop_maps: usize,
    pub probes: usize,
    pub failures: usize,
    /// Largest `|m^T m - I|` over the maps used.
    pub orthogonality: Measured,
    pub first_failure: Option<ProbeSummary>,
    #[serde(skip)]
    pub rows: Vec<(String, usize, FocalProbe)>,
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    /// The check failed exactly as the scenario declares.
    ExpectedFailure,
    Fail,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub check: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

impl CheckOutcome {
    pub fn ok(&self) -> bool {
        self.status != CheckStatus::Fail
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub scenario: String,
    pub provenance: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
    pub germ: GermSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hat_g: Option<HatGSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub focal_profile: Option<ProfileSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tube: Option<TubeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_additivity: Option<RankSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub focal_preservation: Option<PreservationSummary>,
    #[serde(skip)]
    profile_raw: Option<FocalProfile>,
    #[serde(skip)]
    stabilization: Vec<usize>,
}

fn m(value: f64, tolerance: f64) -> Measured {
    Measured::new(value, tolerance)
}

fn probe_summary(p: &FocalProbe) -> ProbeSummary {
    ProbeSummary {
        eta: p.eta.iter().map(|&x| m(x, tol::FOCAL_RADIUS)).collect(),
        multiplicity_source: p.multiplicity_source,
        multiplicity_image: p.multiplicity_image,
        relative_singular_image: m(p.relative_singular_image, tol::FOCAL_REL),
        pass: p.pass,
    }
}

fn germ_summary(sc: &Scenario, germ: &OrbitGerm) -> GermSummary {
    let cert = germ.certify_shape(1e-3);
    GermSummary {
        space: sc.pair_name(),
        action: sc.action_name(),
        ambient_dim: germ.family.ambient_dim(),
        dim: germ.dim(),
        codim: germ.codim(),
        epsilon: germ.epsilon.is_finite().then(|| m(germ.epsilon, tol::FOCAL_RADIUS)),
        shape_asymmetry: m(germ.shape_asymmetry, 1e-9),
        shape_certificate: m(cert.max_residual, 1e-6),
        assumptions: sc.assumptions.clone(),
    }
}

fn hat_g_summary(g: &HatG) -> HatGSummary {
    let r = g.report();
    HatGSummary {
        dim_l_p: r.dim_l_p,
        dim_phi: r.dim_phi,
        dim_hat_g: r.dim_hat_g,
        blocks: r.blocks.iter().map(|b| BlockSummary { dim: b.dim, trivial: b.trivial, irreducible: b.irreducible }).collect(),
        stabilized_at: r.stabilized_at,
        phi_invariance_residual: m(r.phi_invariance_residual, tol::MEMBERSHIP),
        product_residual: m(r.product_residual, tol::MEMBERSHIP),
        closure_residual: m(g.algebra.closure_residual(), tol::MEMBERSHIP),
    }
}

fn equifocal_summary(r: &EquifocalReport) -> EquifocalSummary {
    EquifocalSummary {
        abelian: r.abelian,
        globally_flat: r.globally_flat,
        constant_focal: r.constant_focal,
        worst_residuals: r.worst_residuals.clone(),
        isometries_checked: r.isometries_checked,
        loops_checked: r.loops_checked,
        loops_skipped: r.loops_skipped,
        normal_rank_mismatches: r.normal_rank_mismatches,
        profile_mismatches: r.profile_mismatches,
        failing_probe: r.failing_probe.as_ref().map(probe_summary),
        notes: r.notes.clone(),
    }
}

fn outcome(check: Check, ok: bool, detail: String) -> CheckOutcome {
    CheckOutcome { check: check.name(), status: if ok { CheckStatus::Pass } else { CheckStatus::Fail }, detail }
}

/// Group maps and loop transports on the normal space at the germ point,
/// each probed for preserved focal multiplicities.
fn focal_preservation(germ: &OrbitGerm, g: &HatG, n: usize, seed: u64) -> Result<PreservationSummary> {
    let mut maps: Vec<(String, DMatrix<f64>)> =
        g.sample_group(n, rng::derive(seed, 1)).into_iter().map(|x| ("group".to_string(), x)).collect();
    let fam = &germ.family;
    let mut loop_maps = 0;
    if germ.dim() > 0 {
        let mut r = rng::seeded(rng::derive(seed, 2));
        for _ in 0..n {
            let za = rng::unit_in_span(&mut r, &fam.h);
            let zb = rng::unit_in_span(&mut r, &fam.h);
            let s = 0.1 + 0.5 * rand::Rng::random::<f64>(&mut r);
            let curve = commutator_loop(fam, &za, &zb, s);
            maps.push(("loop".to_string(), loop_holonomy(germ, &curve, TransportMethod::ClosedForm)?));
            loop_maps += 1;
        }
    }
    let k = germ.codim();
    let eye = DMatrix::<f64>::identity(k, k);
    let orthogonality = maps.iter().map(|(_, x)| (x.transpose() * x - &eye).norm()).fold(0.0, f64::max);
    let results: Vec<_> = maps
        .par_iter()
        .enumerate()
        .map(|(i, (_, x))| preserves_focal_structure(germ, germ, &(&germ.normal * x), 1, rng::derive(seed, 100 + i as u64)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, ((kind, _), res)) in maps.iter().zip(results).enumerate() {
        for p in res.probes {
            rows.push((kind.clone(), i, p));
        }
    }
    let failures = rows.iter().filter(|(_, _, p)| !p.pass).count();
    Ok(PreservationSummary {
        group_maps: n,
        loop_maps,
        probes: rows.len(),
        failures,
        orthogonality: m(orthogonality, tol::ORTHOGONAL),
        first_failure: rows.iter().find(|(_, _, p)| !p.pass).map(|(_, _, p)| probe_summary(p)),
        rows,
    })
}

/// Run the requested checks in dependency order. `seed` overrides the
/// scenario's own seed.
pub fn run(sc: &Scenario, seed: Option<u64>) -> Result<Report> {
    let seed = seed.unwrap_or(sc.seed);
    let built = sc.build()?;
    let germ = built.germ;
    let sam = &sc.sampling;
    let mut checks: Vec<Check> = sc.checks.clone();
    checks.sort();
    let mut report = Report {
        schema: REPORT_SCHEMA,
        scenario: sc.name.clone(),
        provenance: sc.provenance.clone(),
        seed,
        passed: true,
        checks: Vec::new(),
        germ: germ_summary(sc, &germ),
        hat_g: None,
        focal_profile: None,
        tube: None,
        rank_additivity: None,
        focal_preservation: None,
        profile_raw: None,
        stabilization: Vec::new(),
    };
    if checks.is_empty() {
        return Ok(report);
    }
    let needs_g = checks.iter().any(|c| c.needs_tube() || matches!(c, Check::HatG | Check::FocalPreservation));
    let hat_g = if needs_g {
        let opts = HolonomyOptions {
            sampler: CurveSampler::default(),
            n_curves: sam.holonomy_curves,
            n_loops: sam.holonomy_loops,
            loop_size: 0.3,
            seed: rng::derive(seed, 1),
        };
        let g = build_hat_g(&germ, &opts)?;
        report.stabilization = g.l_p.stabilization.clone();
        report.hat_g = Some(hat_g_summary(&g));
        Some(g)
    } else {
        None
    };
    let needs_profile = checks.iter().any(|c| matches!(c, Check::FocalProfile | Check::RankAdditivity));
    if needs_profile {
        let xi = built.xi.as_ref().ok_or_else(|| crate::Error::Invalid("focal checks need an xi entry".into()))?;
        let u = xi / xi.norm();
        let limit = default_scan_limit(&germ, &u);
        let limit = if limit.is_finite() { limit } else { 10.0 * germ.space().scale().sqrt() };
        let p = focal_profile(&germ, &u, limit)?;
        report.focal_profile = Some(ProfileSummary {
            scan_limit: m(p.scan_limit, EXACT),
            steps: p.steps,
            events: p
                .events
                .iter()
                .map(|e| EventSummary {
                    radius: m(e.radius, tol::FOCAL_RADIUS),
                    multiplicity: e.multiplicity,
                    relative_singular: m(e.relative, tol::FOCAL_REL),
                })
                .collect(),
        });
        report.profile_raw = Some(p);
    }
    let tube: Option<PartialTube> = if checks.iter().any(|c| c.needs_tube()) {
        let xi = built.xi.as_ref().expect("validated");
        let opts = TubeOptions {
            sampler: CurveSampler::default(),
            n_fibres: sam.tube_fibres,
            n_group: sam.tube_group,
            seed: rng::derive(seed, 2),
        };
        let t = build_partial_tube(&germ, hat_g.as_ref(), xi, &opts)?;
        report.tube = Some(TubeSummary {
            xi_norm: m(xi.norm(), EXACT),
            principal: t.principal,
            degenerate: t.degenerate,
            dim: t.dim(),
            fibre_dim: t.fibre_dim(),
            codim: t.codim(),
            equifocal: None,
            reconstruction: None,
        });
        Some(t)
    } else {
        None
    };
    for check in checks {
        let o = match check {
            Check::HatG => {
                let s = report.hat_g.as_ref().expect("built above");
                let residuals_ok =
                    s.phi_invariance_residual.pass() && s.product_residual.pass() && s.closure_residual.pass();
                let dim_ok = sc.expect.hat_g_dim.is_none_or(|d| d == s.dim_hat_g);
                let detail = match sc.expect.hat_g_dim {
                    Some(d) => format!("dim hat G_p = {} (expected {d})", s.dim_hat_g),
                    None => format!("dim hat G_p = {}", s.dim_hat_g),
                };
                outcome(check, residuals_ok && dim_ok, detail)
            }
            Check::FocalProfile => {
                let p = report.focal_profile.as_ref().expect("built above");
                let detail = match p.events.first() {
                    Some(e) => format!(
                        "{} focal events; first at {:.9} with multiplicity {}",
                        p.events.len(),
                        e.radius.value,
                        e.multiplicity
                    ),
                    None => "no focal events within the scan limit".into(),
                };
                outcome(check, true, detail)
            }
            Check::Equifocal => {
                let t = tube.as_ref().expect("built above");
                let opts = VerifyOptions {
                    n_isometries: sam.verify_isometries,
                    n_focal_directions: sam.focal_directions,
                    n_loops: sam.verify_loops,
                    seed: rng::derive(seed, 3),
                    ..VerifyOptions::default()
                };
                let r = verify_equifocal(t, &opts)?;
                let e = &sc.expect.equifocal;
                let observed = (r.abelian, r.globally_flat, r.constant_focal);
                let matches = observed == (e.abelian, e.globally_flat, e.constant_focal);
                let logged = e.constant_focal || r.failing_probe.is_some();
                let all_true = r.abelian && r.globally_flat && r.constant_focal;
                let status = match (matches && logged, all_true) {
                    (true, true) => CheckStatus::Pass,
                    (true, false) => CheckStatus::ExpectedFailure,
                    (false, _) => CheckStatus::Fail,
                };
                let mut detail = format!(
                    "abelian={} globally_flat={} constant_focal={} (expected {} {} {})",
                    r.abelian, r.globally_flat, r.constant_focal, e.abelian, e.globally_flat, e.constant_focal
                );
                if let Some(p) = &r.failing_probe {
                    detail.push_str(&format!(
                        "; failing probe eta={:?} multiplicity {} -> {}",
                        p.eta, p.multiplicity_source, p.multiplicity_image
                    ));
                }
                report.tube.as_mut().expect("built above").equifocal = Some(equifocal_summary(&r));
                CheckOutcome { check: check.name(), status, detail }
            }
            Check::Reconstruction => {
                let t = tube.as_ref().expect("built above");
                let xi = built.xi.as_ref().expect("validated");
                let reference = germ.at(germ.family.exp_at(&germ.point, xi));
                let opts = HausdorffOptions {
                    samples: sam.hausdorff_samples,
                    starts: sam.hausdorff_starts,
                    seed: rng::derive(seed, 4),
                };
                let h = reconstruct_check(t, &reference, &opts)?;
                let detail = format!(
                    "hausdorff forward {:.3e} backward {:.3e} (bound {:.0e}){}",
                    h.hausdorff_forward.value,
                    h.hausdorff_backward.value,
                    h.hausdorff_forward.tolerance,
                    h.structural_failure.as_deref().map(|s| format!("; {s}")).unwrap_or_default()
                );
                let ok = h.pass;
                report.tube.as_mut().expect("built above").reconstruction = Some(h);
                outcome(check, ok, detail)
            }
            Check::RankAdditivity => {
                let t = tube.as_ref().expect("built above");
                let p = report.profile_raw.as_ref().expect("built above");
                match p.events.first() {
                    None => outcome(check, false, "no focal radius along xi to test at".into()),
                    Some(e) => {
                        let dir = DVector::from_column_slice(&p.direction);
                        let r: RankAdditivity = rank_additivity(t, &(dir * e.radius))?;
                        let detail = format!(
                            "at radius {:.9}: {} = {} + {}",
                            e.radius, r.tube_kernel, r.omega_kernel, r.base_kernel
                        );
                        report.rank_additivity = Some(RankSummary {
                            rho_radius: m(e.radius, tol::FOCAL_RADIUS),
                            tube_kernel: r.tube_kernel,
                            omega_kernel: r.omega_kernel,
                            base_kernel: r.base_kernel,
                            holds: r.holds,
                        });
                        outcome(check, r.holds, detail)
                    }
                }
            }
            Check::FocalPreservation => {
                let g = hat_g.as_ref().expect("built above");
                let s = focal_preservation(&germ, g, sam.preservation_maps, rng::derive(seed, 5))?;
                let ok = s.failures == 0 && s.orthogonality.pass() && s.probes > 0;
                let detail = format!(
                    "{} probes over {} group maps and {} loop transports, {} failures",
                    s.probes, s.group_maps, s.loop_maps, s.failures
                );
                report.focal_preservation = Some(s);
                outcome(check, ok, detail)
            }
        };
        report.checks.push(o);
    }
    report.passed = report.checks.iter().all(CheckOutcome::ok);
    Ok(report)
}

impl Report {
    /// Deterministic pretty-printed JSON.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plot-ready CSV profiles as `(file suffix, contents)`.
    pub fn csv_files(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if let Some(p) = &self.profile_raw {
            let mut s = String::from("radius,multiplicity,min_singular_value,relative_singular\n");
            for e in &p.events {
                s.push_str(&format!("{:.15e},{},{:.6e},{:.6e}\n", e.radius, e.multiplicity, e.min_singular_value, e.relative));
            }
            out.push(("focal_profile.csv", s));
        }
        if !self.stabilization.is_empty() {
            let mut s = String::from("curves,dim_l_p\n");
            for (i, d) in self.stabilization.iter().enumerate() {
                s.push_str(&format!("{i},{d}\n"));
            }
            out.push(("stabilization.csv", s));
        }
        if let Some(p) = &self.focal_preservation {
            let mut s = String::from("source,map,eta_norm,multiplicity_source,multiplicity_image,relative_singular_image,pass\n");
            for (kind, i, q) in &p.rows {
                let n = q.eta.iter().map(|x| x * x).sum::<f64>().sqrt();
                s.push_str(&format!(
                    "{kind},{i},{n:.15e},{},{},{:.6e},{}\n",
                    q.multiplicity_source, q.multiplicity_image, q.relative_singular_image, q.pass
                ));
            }
            out.push(("focal_probes.csv", s));
        }
        out
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut s = format!("scenario {} (seed {})\n", self.scenario, self.seed);
        s.push_str(&format!(
            "  germ: {} orbit of dimension {} and codimension {} in {}\n",
            self.germ.action, self.germ.dim, self.germ.codim, self.germ.space
        ));
        for c in &self.checks {
            let tag = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::ExpectedFailure => "PASS (expected failure)",
                CheckStatus::Fail => "FAIL",
            };
            s.push_str(&format!("  {tag:<24} {:<20} {}\n", c.check, c.detail));
        }
        s
    }
}

//! Scenario documents: a symmetric pair, an isometric action, a base orbit,
//! a tube direction and the checks to run, plus the built-in catalogue.
//!
//! Vectors are written as coefficients on labelled basis elements of the
//! algebra (`X13`, `H1`, `L16`, ...). The tube direction is given at the
//! base point of the space and carried to the orbit point by the geodesic
//! through `exp(base_offset)`; it must land in the normal space there.

mod run;

pub use run::{run, CheckOutcome, CheckStatus, Report, REPORT_SCHEMA};

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{special_orthogonal, special_unitary, InvolutionSpec};
use crate::orbits::{fixed_algebra_of, homogeneous_orbit_germ, srep_orbit_germ, OrbitGerm};
use crate::symspace::SymmetricSpace;

/// Version of the scenario document format.
pub const SCENARIO_SCHEMA: u32 = 1;

/// Compact classical algebra by family and matrix size.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgebraSpec {
    Su(usize),
    So(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub algebra: AlgebraSpec,
    /// Cartan involution of the pair.
    pub involution: InvolutionSpec,
    /// Positive multiple of the negative Killing form used as metric.
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

/// Which subgroup acts, and on what.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionSpec {
    /// Fixed group of a second involution commuting with the Cartan one.
    Hermann { involution: InvolutionSpec },
    /// The isotropy group `K` acting on `N`.
    Isotropy,
    /// The connected subgroup spanned by labelled basis elements.
    Subgroup { span: Vec<String> },
    /// `K` acting linearly on `p`.
    Srep,
}

/// Tube direction and radius; exactly one of the radius fields is set.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct XiSpec {
    pub direction: BTreeMap<String, f64>,
    #[serde(default)]
    pub radius: Option<f64>,
    /// Radius as a fraction of the germ's estimated `epsilon`.
    #[serde(default)]
    pub epsilon_fraction: Option<f64>,
}

/// Sampling budgets. Defaults match the library defaults.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    pub holonomy_curves: usize,
    pub holonomy_loops: usize,
    pub tube_fibres: usize,
    pub tube_group: usize,
    pub verify_isometries: usize,
    pub verify_loops: usize,
    pub focal_directions: usize,
    pub hausdorff_samples: usize,
    pub hausdorff_starts: usize,
    /// Group maps and loop transports, each, for `focal_preservation`.
    pub preservation_maps: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            holonomy_curves: 50,
            holonomy_loops: 20,
            tube_fibres: 8,
            tube_group: 12,
            verify_isometries: 16,
            verify_loops: 6,
            focal_directions: 2,
            hausdorff_samples: 200,
            hausdorff_starts: 3,
            preservation_maps: 100,
        }
    }
}

/// Checks in dependency order.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// Build the polar slice group and its invariant splitting.
    HatG,
    /// Focal events of the base orbit along the tube direction.
    FocalProfile,
    /// Abelian section, global flatness and constant focal structure.
    Equifocal,
    /// Hausdorff distance to the orbit through `exp(xi)`.
    Reconstruction,
    /// Kernel additivity at the first focal radius along the tube direction.
    RankAdditivity,
    /// Slice-group elements and loop transports preserve focal multiplicities.
    FocalPreservation,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Self::HatG => "hat_g",
            Self::FocalProfile => "focal_profile",
            Self::Equifocal => "equifocal",
            Self::Reconstruction => "reconstruction",
            Self::RankAdditivity => "rank_additivity",
            Self::FocalPreservation => "focal_preservation",
        }
    }

    fn needs_tube(self) -> bool {
        matches!(self, Self::Equifocal | Self::Reconstruction | Self::RankAdditivity)
    }
}

/// Expected equifocality flags; unstated flags are expected to hold.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EquifocalExpectation {
    #[serde(default = "yes")]
    pub abelian: bool,
    #[serde(default = "yes")]
    pub globally_flat: bool,
    #[serde(default = "yes")]
    pub constant_focal: bool,
}

fn yes() -> bool {
    true
}

impl Default for EquifocalExpectation {
    fn default() -> Self {
        Self { abelian: true, globally_flat: true, constant_focal: true }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    #[serde(default)]
    pub hat_g_dim: Option<usize>,
    #[serde(default)]
    pub equifocal: EquifocalExpectation,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    /// One line naming the geometric example the scenario realizes.
    pub provenance: String,
    pub description: String,
    pub pair: PairSpec,
    pub action: ActionSpec,
    #[serde(default)]
    pub base_offset: BTreeMap<String, f64>,
    #[serde(default)]
    pub xi: Option<XiSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub checks: Vec<Check>,
    #[serde(default)]
    pub expect: Expectations,
    /// Hypotheses taken on trust rather than verified.
    #[serde(default)]
    pub assumptions: Vec<String>,
}

const BUILTIN: &[(&str, &str)] = &[
    ("cp2-reconstruction", include_str!("../../scenarios/cp2-reconstruction.json")),
    ("cpn-rpn-quadric", include_str!("../../scenarios/cpn-rpn-quadric.json")),
    ("point-focal-korbit", include_str!("../../scenarios/point-focal-korbit.json")),
    ("sphere-isoparametric-codim2", include_str!("../../scenarios/sphere-isoparametric-codim2.json")),
    ("su3-so3-flat", include_str!("../../scenarios/su3-so3-flat.json")),
];

/// Names of the built-in scenarios in catalogue order.
pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _)| *n).collect()
}

/// JSON text of a built-in scenario.
pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parsed and validated built-in scenario.
pub fn builtin(name: &str) -> Result<Scenario> {
    let src = builtin_source(name).ok_or_else(|| Error::Invalid(format!("unknown scenario '{name}'")))?;
    Scenario::from_json(src)
}

fn space_of(pair: &PairSpec) -> Result<Arc<SymmetricSpace>> {
    let alg = match pair.algebra {
        AlgebraSpec::Su(n) => special_unitary(n)?,
        AlgebraSpec::So(n) => special_orthogonal(n)?,
    };
    let theta = pair.involution.matrix(&alg)?;
    Ok(Arc::new(SymmetricSpace::from_pair(alg, theta, pair.scale)?))
}

/// Adapted coordinates of a labelled combination; unknown labels are errors.
fn combine(space: &SymmetricSpace, terms: &BTreeMap<String, f64>) -> Result<DVector<f64>> {
    let alg = space.algebra();
    let mut v = DVector::zeros(space.dim_g());
    for (label, c) in terms {
        let i = alg.label_index(label).ok_or_else(|| {
            Error::Invalid(format!("unknown basis label '{label}'; available: {}", alg.labels().join(", ")))
        })?;
        if !c.is_finite() {
            return Err(Error::Invalid(format!("coefficient of '{label}' is not finite")));
        }
        v[i] = *c;
    }
    Ok(space.to_adapted(&v))
}

/// The base orbit germ and the tube vector at its point.
pub struct Built {
    pub germ: OrbitGerm,
    /// Tube vector in `g` coordinates at the germ point, if requested.
    pub xi: Option<DVector<f64>>,
}

impl Scenario {
    /// Parse and validate a scenario document.
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text).map_err(|e| Error::Invalid(format!("scenario schema: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    /// Structural checks that need no geometry.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCENARIO_SCHEMA {
            return Err(Error::Invalid(format!(
                "scenario schema_version {} is not supported (expected {SCENARIO_SCHEMA})",
                self.schema_version
            )));
        }
        if self.name.trim().is_empty() {
            return Err(Error::Invalid("scenario name is empty".into()));
        }
        if !(self.pair.scale > 0.0 && self.pair.scale.is_finite()) {
            return Err(Error::Invalid("pair scale must be positive".into()));
        }
        let mut seen = self.checks.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.checks.len() {
            return Err(Error::Invalid("checks are listed more than once".into()));
        }
        if self.checks.iter().any(|c| c.needs_tube()) && self.xi.is_none() {
            return Err(Error::Invalid("tube checks need an xi entry".into()));
        }
        if let Some(xi) = &self.xi {
            match (xi.radius, xi.epsilon_fraction) {
                (Some(r), None) if r > 0.0 && r.is_finite() => {}
                (None, Some(f)) if f > 0.0 && f < 1.0 => {}
                (Some(_), None) => return Err(Error::Invalid("xi radius must be positive".into())),
                (None, Some(_)) => return Err(Error::Invalid("xi epsilon_fraction must lie in (0, 1)".into())),
                _ => return Err(Error::Invalid("xi needs exactly one of radius and epsilon_fraction".into())),
            }
            if xi.direction.is_empty() {
                return Err(Error::Invalid("xi direction is empty".into()));
            }
        }
        let s = &self.sampling;
        if s.hausdorff_samples < 200 && self.checks.contains(&Check::Reconstruction) {
            return Err(Error::Invalid("reconstruction needs at least 200 samples per side".into()));
        }
        if s.holonomy_curves == 0 || s.tube_group == 0 || s.verify_isometries == 0 || s.hausdorff_starts == 0 {
            return Err(Error::Invalid("sampling budgets must be positive".into()));
        }
        Ok(())
    }

    /// Build the space, the base orbit germ and the tube vector.
    pub fn build(&self) -> Result<Built> {
        let space = space_of(&self.pair)?;
        let offset = combine(&space, &self.base_offset)?;
        let germ = match &self.action {
            ActionSpec::Srep => srep_orbit_germ(Arc::clone(&space), &offset)?,
            ActionSpec::Isotropy => homogeneous_orbit_germ(Arc::clone(&space), &space.k_basis(), &offset)?,
            ActionSpec::Hermann { involution } => {
                let t = space.operator_to_adapted(&involution.matrix(space.algebra())?);
                let h = fixed_algebra_of(&space, &t)?;
                homogeneous_orbit_germ(Arc::clone(&space), &h, &offset)?
            }
            ActionSpec::Subgroup { span } => {
                if span.is_empty() {
                    return Err(Error::Invalid("subgroup span is empty".into()));
                }
                let cols = span
                    .iter()
                    .map(|l| combine(&space, &BTreeMap::from([(l.clone(), 1.0)])))
                    .collect::<Result<Vec<_>>>()?;
                let h = DMatrix::from_columns(&cols);
                homogeneous_orbit_germ(Arc::clone(&space), &h, &offset)?
            }
        };
        let xi = match &self.xi {
            None => None,
            Some(x) => {
                let v = combine(&space, &x.direction)?;
                let v = germ.family.geodesic_transport(&offset) * v;
                germ.check_normal(&v).map_err(|e| Error::Invalid(format!("xi direction: {e}")))?;
                let n = v.norm();
                if n == 0.0 {
                    return Err(Error::Invalid("xi direction is zero".into()));
                }
                let r = match (x.radius, x.epsilon_fraction) {
                    (Some(r), _) => r,
                    (_, Some(f)) => f * germ.epsilon,
                    _ => unreachable!("validated"),
                };
                if !(r < germ.epsilon) {
                    return Err(Error::Invalid(format!(
                        "xi radius {r:.6e} is not below the germ bound {:.6e}",
                        germ.epsilon
                    )));
                }
                Some(v * (r / n))
            }
        };
        Ok(Built { germ, xi })
    }

    /// Readable name of the symmetric pair.
    pub fn pair_name(&self) -> String {
        let alg = match self.pair.algebra {
            AlgebraSpec::Su(n) => format!("su({n})"),
            AlgebraSpec::So(n) => format!("so({n})"),
        };
        let inv = match &self.pair.involution {
            InvolutionSpec::DiagConjugation(s) => {
                let s: Vec<String> = s.iter().map(|x| format!("{x:+}")).collect();
                format!("diag({})", s.join(","))
            }
            InvolutionSpec::ComplexConjugation => "complex conjugation".into(),
            InvolutionSpec::Matrix(_) => "explicit involution".into(),
            InvolutionSpec::Stored => "stored involution".into(),
        };
        format!("{alg} with {inv}")
    }

    fn action_name(&self) -> String {
        match &self.action {
            ActionSpec::Hermann { .. } => "hermann".into(),
            ActionSpec::Isotropy => "isotropy".into(),
            ActionSpec::Subgroup { span } => format!("subgroup[{}]", span.join(",")),
            ActionSpec::Srep => "srep".into(),
        }
    }
}

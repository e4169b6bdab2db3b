use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::action::GaugeConfiguration;
use crate::algebra::AlgebraProfile;
use crate::bratteli::BratteliArrow;
use crate::differential::UniversalOneForm;
use crate::error::{NcgError, Result};
use crate::krajewski::{self, KrajewskiDiagram, RealSpectralTriple};
use crate::lifting::{format_key, parse_key, DiagramLift};
use crate::linalg::ComplexMatrix;

pub const FORMAT_VERSION: u32 = 1;

/// Named objects. Lifts refer to their arrow and diagrams by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bundle {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub profiles: BTreeMap<String, AlgebraProfile>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub diagrams: BTreeMap<String, KrajewskiDiagram>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub triples: BTreeMap<String, RealSpectralTriple>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub arrows: BTreeMap<String, BratteliArrow>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub lifts: BTreeMap<String, LiftEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub forms: BTreeMap<String, UniversalOneForm>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub configurations: BTreeMap<String, GaugeConfiguration>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftEntry {
    pub arrow: String,
    pub source: String,
    pub target: String,
    #[serde(default)]
    pub u: BTreeMap<String, ComplexMatrix>,
    #[serde(default)]
    pub normalized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<BTreeMap<String, f64>>,
}

impl LiftEntry {
    pub fn from_lift(arrow: &str, source: &str, target: &str, lift: &DiagramLift) -> Self {
        Self {
            arrow: arrow.into(),
            source: source.into(),
            target: target.into(),
            u: lift.u.iter().map(|((v, w), m)| (format_key(v, w), m.clone())).collect(),
            normalized: lift.normalized,
            kappa: lift.kappa.clone(),
        }
    }
}

impl Default for Bundle {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            profiles: BTreeMap::new(),
            diagrams: BTreeMap::new(),
            triples: BTreeMap::new(),
            arrows: BTreeMap::new(),
            lifts: BTreeMap::new(),
            forms: BTreeMap::new(),
            configurations: BTreeMap::new(),
        }
    }
}

fn lookup<'a, T>(map: &'a BTreeMap<String, T>, kind: &str, name: &str) -> Result<&'a T> {
    map.get(name).ok_or_else(|| NcgError::Reference(format!("no {kind} named `{name}`")))
}

fn at(path: String, e: NcgError) -> NcgError {
    NcgError::Parse { path, message: e.to_string() }
}

impl Bundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn diagram(&self, name: &str) -> Result<&KrajewskiDiagram> {
        lookup(&self.diagrams, "diagram", name)
    }

    pub fn triple(&self, name: &str) -> Result<&RealSpectralTriple> {
        lookup(&self.triples, "triple", name)
    }

    pub fn arrow(&self, name: &str) -> Result<&BratteliArrow> {
        lookup(&self.arrows, "arrow", name)
    }

    pub fn form(&self, name: &str) -> Result<&UniversalOneForm> {
        lookup(&self.forms, "form", name)
    }

    pub fn configuration(&self, name: &str) -> Result<&GaugeConfiguration> {
        lookup(&self.configurations, "configuration", name)
    }

    /// The lift with its arrow and diagrams resolved.
    pub fn lift(&self, name: &str) -> Result<DiagramLift> {
        let e = lookup(&self.lifts, "lift", name)?;
        let mut lift = DiagramLift::new(
            self.arrow(&e.arrow)?.clone(),
            self.diagram(&e.source)?.clone(),
            self.diagram(&e.target)?.clone(),
        )?;
        for (key, m) in &e.u {
            let (v, w) = parse_key(key)?;
            lift.set(&v, &w, m.clone())?;
        }
        lift.normalized = e.normalized;
        lift.kappa = e.kappa.clone();
        Ok(lift)
    }

    /// Resolves references and checks shapes. Mathematical validity
    /// (axioms, compatibility) is left to the dedicated checks.
    pub fn check(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(NcgError::Parse {
                path: "format_version".into(),
                message: format!("unsupported version {}, expected {FORMAT_VERSION}", self.format_version),
            });
        }
        const STRUCTURAL: [&str; 5] = [
            krajewski::CHECK_IDS,
            krajewski::CHECK_RANGE,
            krajewski::CHECK_JIM_TOTAL,
            krajewski::CHECK_EDGE_ENDS,
            krajewski::CHECK_EDGE_SHAPE,
        ];
        for (name, d) in &self.diagrams {
            let report = d.validate();
            if let Some(c) = report.checks.iter().find(|c| !c.passed && STRUCTURAL.contains(&c.name.as_str())) {
                let detail = c.failures.first().cloned().unwrap_or_default();
                return Err(NcgError::Shape(format!("diagram `{name}`: {} ({detail})", c.name)));
            }
        }
        for (name, t) in &self.triples {
            t.check_shapes().map_err(|e| at(format!("triples.{name}"), e))?;
        }
        for (name, w) in &self.forms {
            if let Some((a0, _)) = w.terms.first() {
                if w.terms.iter().any(|(x, y)| x.profile() != a0.profile() || y.profile() != a0.profile()) {
                    return Err(NcgError::Shape(format!("form `{name}` mixes algebras")));
                }
            }
        }
        for (name, cfg) in &self.configurations {
            cfg.check(f64::INFINITY).map_err(|e| at(format!("configurations.{name}"), e))?;
        }
        for name in self.lifts.keys() {
            self.lift(name).map_err(|e| match e {
                NcgError::Reference(m) => NcgError::Reference(format!("lift `{name}`: {m}")),
                e => at(format!("lifts.{name}"), e),
            })?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let bundle: Bundle = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            NcgError::Parse { path, message: e.into_inner().to_string() }
        })?;
        bundle.check()?;
        Ok(bundle)
    }

    /// Pretty JSON with a trailing newline. Maps are ordered, so equal
    /// bundles give equal text.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serialization is infallible");
        s.push('\n');
        s
    }
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<Bundle> {
    Bundle::from_json(&fs::read_to_string(path)?)
}

pub fn save_bundle(bundle: &Bundle, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, bundle.to_json())?;
    Ok(())
}

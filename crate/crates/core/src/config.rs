//! JSON project configuration.
//!
//! ```json
//! {
//!   "plant": { "trailer": { ...TrailerParams } }   or   { "vertices": [ {"A":..,"E":..,"C":..,"D":..,"B":..} ] },
//!   "design": { "gamma", "alpha", "rho", "omega", "H", "J", "zeta0", "sigma0", "eta0" },
//!   "solver": { ...SolverSettings },          optional
//!   "search": { ...SearchGrid },              optional
//!   "sim": { ...SimConfig },                  optional
//!   "scenario": { ...ScenarioConfig },        optional, trailer runs
//!   "disturbance": { "kind": "zero" | "sine" | "trailer", ... },  optional
//!   "gains": { "K0", "K1", "K2" },            optional
//!   "verify": { "samples": 16, "seed": 7 }    optional
//! }
//! ```
//!
//! Matrices are row-major nested arrays. Overrides `a.b.c=value` replace one
//! entry before deserialization; the value is parsed as JSON and falls back
//! to a plain string.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{make_polytope, DesignConfig, PolytopicPlant, VertexMatrices};
use crate::sdp::SolverSettings;
use crate::sim::{Disturbance, Gains, InitialState, SimConfig, SineDisturbance, ZeroDisturbance};
use crate::synthesis::SearchGrid;
use crate::trailer::{build_trailer_polytope, ScenarioConfig, TrailerDisturbance, TrailerParams};

/// Default benchmark configuration shipped with the crate.
pub const TRAILER_JSON: &str = include_str!("../data/trailer.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantSpec {
    Trailer(TrailerParams),
    Vertices(Vec<VertexMatrices>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceConfig {
    #[default]
    Zero,
    Sine { amplitude: Vec<f64>, omega: f64 },
    Trailer,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { samples: 16, seed: 7 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectConfig {
    pub plant: PlantSpec,
    pub design: DesignConfig,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub search: SearchGrid,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub disturbance: DisturbanceConfig,
    #[serde(default)]
    pub gains: Option<Gains>,
    #[serde(default)]
    pub verify: VerifyConfig,
}

impl ProjectConfig {
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        let mut v: Value = serde_json::from_str(text)?;
        for o in overrides {
            apply_override(&mut v, o)?;
        }
        let cfg: Self = serde_json::from_value(v)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, overrides)
    }

    pub fn default_trailer() -> Self {
        Self::from_json(TRAILER_JSON, &[]).expect("embedded trailer config is valid")
    }

    pub fn plant(&self) -> Result<PolytopicPlant> {
        match &self.plant {
            PlantSpec::Trailer(p) => build_trailer_polytope(p),
            PlantSpec::Vertices(v) => make_polytope(v.clone()),
        }
    }

    pub fn trailer_params(&self) -> Option<&TrailerParams> {
        match &self.plant {
            PlantSpec::Trailer(p) => Some(p),
            PlantSpec::Vertices(_) => None,
        }
    }

    /// Disturbance acting on `vertex` of the configured plant. `delta` is the
    /// admissible bound reported alongside the trailer disturbance.
    pub fn disturbance(&self, vertex: usize, delta: Option<f64>) -> Result<Box<dyn Disturbance>> {
        let n = self.design.zeta0.len();
        Ok(match &self.disturbance {
            DisturbanceConfig::Zero => Box::new(ZeroDisturbance(n)),
            DisturbanceConfig::Sine { amplitude, omega } => {
                if amplitude.len() != n {
                    return Err(Error::Config(format!(
                        "sine amplitude has {} entries, plant has n = {n}",
                        amplitude.len()
                    )));
                }
                Box::new(SineDisturbance { amplitude: amplitude.clone(), omega: *omega })
            }
            DisturbanceConfig::Trailer => {
                let params = self
                    .trailer_params()
                    .ok_or_else(|| Error::Config("trailer disturbance needs a trailer plant".into()))?;
                let verts = params.vertex_parameters();
                let (_, m2, m3) = *verts
                    .get(vertex)
                    .ok_or_else(|| Error::Config(format!("vertex {vertex} out of range 0..{}", verts.len())))?;
                Box::new(
                    TrailerDisturbance::new(params, m2, m3)?
                        .with_a22(self.scenario.include_a22)
                        .with_external(self.scenario.external_disturbance)
                        .with_bound(delta),
                )
            }
        })
    }

    pub fn initial_state(&self) -> InitialState {
        InitialState {
            zeta: self.design.zeta0.clone(),
            sigma: self.design.sigma0.clone(),
            eta: self.design.eta0.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        self.solver.validate()?;
        self.search.validate()?;
        self.sim.validate()?;
        if let Some(p) = self.trailer_params() {
            p.validate()?;
        }
        let plant = self.plant()?;
        self.design.validate_for(&plant)
    }
}

/// Sets `key` (dot separated) to `value` inside `root`.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{spec}' is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(arr) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("'{part}' in '{key}' is not an array index")))?;
                let len = arr.len();
                let slot = arr
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("index {idx} out of range ({len}) in '{key}'")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Config(format!("'{key}' does not name a nested field"))),
        };
    }
    Ok(())
}

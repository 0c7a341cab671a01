//! JSON run configuration. Every section has defaults, so `{}` is a
//! valid file; unknown keys are rejected at every level.

use std::path::Path;

use channel_fsi::elasticity::LameParameters;
use channel_fsi::fluid::{FluidOptions, InflowData, InflowProfile, ProfileShape};
use channel_fsi::fsi::CouplingOptions;
use channel_fsi::mesh::ChannelGeometry;
use channel_fsi::sensitivity::{SensitivityOptions, TaylorOptions};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, ConfigIssue};

/// Upper bound on uniform refinements; each one quadruples the cell count.
pub const MAX_REFINEMENTS: usize = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// transformed Navier-Stokes coupled through the flow map
    #[default]
    Full,
    /// no convection and the flow map frozen at the identity
    LinearSurrogate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    pub viscosity: f64,
    pub lame: LameParameters,
    pub model: Model,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            viscosity: 1.0,
            lame: LameParameters { lambda: 100.0, mu: 50.0 },
            model: Model::Full,
        }
    }
}

/// Step sizes and tolerances of the Taylor remainder test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaylorConfig {
    /// strictly decreasing, at least three
    pub steps: Vec<f64>,
    pub min_slope: f64,
    pub coupling: CouplingOptions,
    pub sensitivity: SensitivityOptions,
}

impl Default for TaylorConfig {
    fn default() -> Self {
        let opts = TaylorOptions::default();
        Self {
            steps: vec![1e-2, 3e-3, 1e-3, 3e-4],
            min_slope: opts.min_slope,
            coupling: opts.coupling,
            sensitivity: opts.sensitivity,
        }
    }
}

impl TaylorConfig {
    pub fn options(&self) -> TaylorOptions {
        TaylorOptions {
            coupling: self.coupling,
            sensitivity: self.sensitivity,
            min_slope: self.min_slope,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManufacturedSolution {
    #[default]
    Trig,
    Polynomial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MmsConfig {
    pub solution: ManufacturedSolution,
    pub viscosity: f64,
    /// structured spacing of the coarsest unit-square mesh
    pub coarse_h: f64,
    pub levels: usize,
}

impl Default for MmsConfig {
    fn default() -> Self {
        Self {
            solution: ManufacturedSolution::Trig,
            viscosity: 1.0,
            coarse_h: 0.25,
            levels: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// inflow magnitudes of the contraction sweep
    pub magnitudes: Vec<f64>,
    /// random starts of the power iteration
    pub samples: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            magnitudes: vec![0.0125, 0.025, 0.05, 0.1],
            samples: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub geometry: ChannelGeometry,
    /// uniform refinements applied after meshing
    pub refinements: usize,
    pub physics: Physics,
    /// inflow data `g`
    pub inflow: InflowProfile,
    /// perturbation direction `δg` of the sensitivity scenarios
    pub direction: InflowProfile,
    /// Picard options of the standalone fluid solves
    pub fluid: FluidOptions,
    pub coupling: CouplingOptions,
    pub sensitivity: SensitivityOptions,
    pub taylor: TaylorConfig,
    pub mms: MmsConfig,
    pub probes: ProbeConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: ChannelGeometry::default(),
            refinements: 0,
            physics: Physics::default(),
            inflow: InflowProfile::parabolic(0.05),
            direction: InflowProfile {
                magnitude: 1.0,
                shape: ProfileShape::Skewed,
            },
            fluid: FluidOptions::default(),
            coupling: CouplingOptions::default(),
            sensitivity: SensitivityOptions::default(),
            taylor: TaylorConfig::default(),
            mms: MmsConfig::default(),
            probes: ProbeConfig::default(),
            seed: 0,
        }
    }
}

fn positive(issues: &mut Vec<ConfigIssue>, key: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        issues.push(ConfigIssue::new(key, format!("must be positive and finite, got {v}")));
    }
}

fn at_least_one(issues: &mut Vec<ConfigIssue>, key: &str, v: usize) {
    if v == 0 {
        issues.push(ConfigIssue::new(key, "must be at least 1"));
    }
}

fn check_fluid(issues: &mut Vec<ConfigIssue>, prefix: &str, o: &FluidOptions) {
    positive(issues, &format!("{prefix}.tol"), o.tol);
    at_least_one(issues, &format!("{prefix}.max_iter"), o.max_iter);
}

fn check_coupling(issues: &mut Vec<ConfigIssue>, prefix: &str, o: &CouplingOptions) {
    let before = issues.len();
    if !(o.relaxation > 0.0 && o.relaxation <= 1.0) {
        issues.push(ConfigIssue::new(
            format!("{prefix}.relaxation"),
            format!("relaxation must lie in (0, 1], got {}", o.relaxation),
        ));
    }
    positive(issues, &format!("{prefix}.tol"), o.tol);
    at_least_one(issues, &format!("{prefix}.max_outer_iter"), o.max_outer_iter);
    at_least_one(issues, &format!("{prefix}.divergence_window"), o.divergence_window);
    check_fluid(issues, &format!("{prefix}.fluid"), &o.fluid);
    // backstop for invariants owned by the solver itself
    if issues.len() == before {
        if let Err(e) = o.validate() {
            issues.push(ConfigIssue::new(prefix, e.to_string()));
        }
    }
}

fn check_sensitivity(issues: &mut Vec<ConfigIssue>, prefix: &str, o: &SensitivityOptions) {
    positive(issues, &format!("{prefix}.tol"), o.tol);
    at_least_one(issues, &format!("{prefix}.max_iter"), o.max_iter);
    at_least_one(issues, &format!("{prefix}.window"), o.window);
}

fn check_profile(issues: &mut Vec<ConfigIssue>, key: &str, p: &InflowProfile, height: f64) {
    if !p.magnitude.is_finite() {
        issues.push(ConfigIssue::new(format!("{key}.magnitude"), "must be finite"));
    } else if height > 0.0 && height.is_finite() {
        if let Err(e) = p.check_admissible(height) {
            issues.push(ConfigIssue::new(key, e.to_string()));
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Reads and parses a config file; `None` yields the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|e| CliError::config("config", e.to_string()))
    }

    /// All invariants of every section, checked before any solve.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut issues = Vec::new();
        if let Err(e) = self.geometry.validate() {
            issues.push(ConfigIssue::new("geometry", e.to_string()));
        }
        if self.refinements > MAX_REFINEMENTS {
            issues.push(ConfigIssue::new(
                "refinements",
                format!("must be at most {MAX_REFINEMENTS}, got {}", self.refinements),
            ));
        }
        positive(&mut issues, "physics.viscosity", self.physics.viscosity);
        if let Err(e) = self.physics.lame.validate() {
            issues.push(ConfigIssue::new("physics.lame", e));
        }
        let height = self.geometry.channel_height;
        check_profile(&mut issues, "inflow", &self.inflow, height);
        check_profile(&mut issues, "direction", &self.direction, height);
        check_fluid(&mut issues, "fluid", &self.fluid);
        check_coupling(&mut issues, "coupling", &self.coupling);
        check_sensitivity(&mut issues, "sensitivity", &self.sensitivity);

        let steps = &self.taylor.steps;
        if steps.len() < 3 {
            issues.push(ConfigIssue::new("taylor.steps", format!("need at least 3 step sizes, got {}", steps.len())));
        }
        if steps.iter().any(|&h| !(h > 0.0 && h.is_finite())) || steps.windows(2).any(|w| w[1] >= w[0]) {
            issues.push(ConfigIssue::new("taylor.steps", "step sizes must be positive and strictly decreasing"));
        }
        positive(&mut issues, "taylor.min_slope", self.taylor.min_slope);
        check_coupling(&mut issues, "taylor.coupling", &self.taylor.coupling);
        check_sensitivity(&mut issues, "taylor.sensitivity", &self.taylor.sensitivity);

        positive(&mut issues, "mms.viscosity", self.mms.viscosity);
        if !(self.mms.coarse_h > 0.0 && self.mms.coarse_h <= 0.5) {
            issues.push(ConfigIssue::new("mms.coarse_h", format!("must lie in (0, 0.5], got {}", self.mms.coarse_h)));
        }
        if !(2..=5).contains(&self.mms.levels) {
            issues.push(ConfigIssue::new("mms.levels", format!("must lie in 2..=5, got {}", self.mms.levels)));
        }

        if self.probes.magnitudes.is_empty() {
            issues.push(ConfigIssue::new("probes.magnitudes", "must not be empty"));
        }
        for m in &self.probes.magnitudes {
            positive(&mut issues, "probes.magnitudes", *m);
        }
        at_least_one(&mut issues, "probes.samples", self.probes.samples);

        if issues.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(issues))
        }
    }

    pub fn inflow_data(&self) -> InflowData {
        self.inflow.into()
    }

    pub fn direction_data(&self) -> InflowData {
        self.direction.into()
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn content_hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    /// The config a scenario reading only `keys` sees: those subtrees
    /// are taken from `self`, everything else reverts to the defaults.
    pub fn project(&self, keys: &[&str]) -> Self {
        let source = self.to_value();
        let mut target = Self::default().to_value();
        for key in keys {
            let path: Vec<&str> = key.split('.').collect();
            if let Some(v) = lookup(&source, &path) {
                set(&mut target, &path, v.clone());
            }
        }
        serde_json::from_value(target).expect("projection of a valid config")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn lookup<'a>(v: &'a Value, path: &[&str]) -> Option<&'a Value> {
    path.iter().try_fold(v, |v, k| v.get(k))
}

fn set(v: &mut Value, path: &[&str], new: Value) {
    match path {
        [] => *v = new,
        [head, rest @ ..] => {
            if !v.is_object() {
                *v = Value::Object(Default::default());
            }
            let entry = v.as_object_mut().unwrap().entry(*head).or_insert(Value::Null);
            set(entry, rest, new);
        }
    }
}

/// Dotted paths of every leaf of the default config, sorted.
pub fn schema_keys() -> Vec<String> {
    fn walk(v: &Value, prefix: &str, out: &mut Vec<String>) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(child, &key, out);
                }
            }
            _ => out.push(prefix.to_string()),
        }
    }
    let mut out = Vec::new();
    walk(&RunConfig::default().to_value(), "", &mut out);
    out
}

/// Leaf keys equal to or below any of `prefixes`.
pub fn expand_keys(prefixes: &[&str]) -> Vec<String> {
    schema_keys()
        .into_iter()
        .filter(|k| {
            prefixes
                .iter()
                .any(|p| k == p || k.strip_prefix(p).is_some_and(|rest| rest.starts_with('.')))
        })
        .collect()
}

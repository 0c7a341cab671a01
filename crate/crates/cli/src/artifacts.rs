//! Output directory handling. Text artifacts carry the config hash in a
//! header line; `summary.json` carries the full config and the SHA-256
//! of every other artifact.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use channel_fsi::fem::FeSpace;
use channel_fsi::mesh::Mesh;
use serde::Serialize;
use serde_json::Value;

use crate::config::{sha256_hex, RunConfig};
use crate::error::CliError;
use crate::registry::Scenario;

pub const SUMMARY_FILE: &str = "summary.json";

pub struct ArtifactDir {
    dir: PathBuf,
    config_hash: String,
    hashes: BTreeMap<String, String>,
}

impl ArtifactDir {
    pub fn create(dir: &Path, config_hash: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config_hash: config_hash.to_string(),
            hashes: BTreeMap::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Output { path, source })?;
        self.hashes.insert(name.to_string(), sha256_hex(contents.as_bytes()));
        log::info!("wrote {name}");
        Ok(())
    }

    fn provenance(&self) -> String {
        format!("# config_sha256 {}\n", self.config_hash)
    }

    /// CSV body with a `#` provenance line in front of the header row.
    pub fn csv(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let text = format!("{}{body}", self.provenance());
        self.write(name, &text)
    }

    pub fn mesh(&mut self, mesh: &Mesh) -> Result<(), CliError> {
        let text = format!("{}{}", self.provenance(), channel_fsi::mesh::io::to_text(mesh));
        self.write("mesh.txt", &text)
    }

    /// Legacy VTK; the provenance goes into the free-form title line.
    pub fn vtk(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let mut lines: Vec<&str> = body.lines().collect();
        let title = format!("channel-fsi config_sha256 {}", self.config_hash);
        if lines.len() > 1 {
            lines[1] = &title;
        }
        let mut text = lines.join("\n");
        text.push('\n');
        self.write(name, &text)
    }

    pub fn finish(self, summary: &Summary) -> Result<(), CliError> {
        let mut summary = serde_json::to_value(summary).expect("summary serializes");
        summary["artifacts"] = serde_json::to_value(&self.hashes).expect("hash map serializes");
        let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        text.push('\n');
        let path = self.dir.join(SUMMARY_FILE);
        fs::write(&path, text).map_err(|source| CliError::Output { path, source })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub requirement: String,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, requirement: &str, passed: bool) -> Self {
        Self {
            name: name.to_string(),
            value,
            requirement: requirement.to_string(),
            passed,
        }
    }

    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self::new(name, value, &format!("<= {bound}"), value <= bound)
    }

    pub fn below(name: &str, value: f64, bound: f64) -> Self {
        Self::new(name, value, &format!("< {bound}"), value < bound)
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self::new(name, value, &format!(">= {bound}"), value >= bound)
    }

    pub fn within(name: &str, value: f64, target: f64, tol: f64) -> Self {
        Self::new(name, value, &format!("|x - {target}| <= {tol}"), (value - target).abs() <= tol)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub category: &'static str,
    pub exit_code: u8,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Passed,
    Failed,
    Error,
}

/// Contents of `summary.json`; `artifacts` is appended on write.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: Scenario,
    pub status: Status,
    pub config_sha256: String,
    pub config: RunConfig,
    pub results: Value,
    pub checks: Vec<Check>,
    pub error: Option<ErrorRecord>,
}

impl Summary {
    pub fn new(scenario: Scenario, config: &RunConfig) -> Self {
        Self {
            tool: "channel-fsi",
            version: env!("CARGO_PKG_VERSION"),
            scenario,
            status: Status::Passed,
            config_sha256: config.content_hash(),
            config: config.clone(),
            results: Value::Null,
            checks: Vec::new(),
            error: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Passed
    }
}

/// Vector P2 coefficients spread onto the mesh P2 node set; nodes outside
/// the space stay zero.
pub fn nodal_vectors(mesh: &Mesh, space: &FeSpace, coeffs: &[f64], out: &mut [[f64; 2]]) {
    for node in 0..space.n_nodes() {
        out[space.mesh_node(node)] = [coeffs[2 * node], coeffs[2 * node + 1]];
    }
    debug_assert_eq!(out.len(), mesh.n_p2_nodes());
}

/// P1 scalar on the P2 node set: vertex values, and the mean of the two
/// endpoints at the edge midpoints of the space's elements.
pub fn nodal_p1_scalar(mesh: &Mesh, space: &FeSpace, coeffs: &[f64]) -> Vec<f64> {
    let nv = mesh.n_vertices();
    let mut out = vec![0.0; mesh.n_p2_nodes()];
    for node in 0..space.n_nodes() {
        out[space.mesh_node(node)] = coeffs[node];
    }
    for &t in space.elements() {
        for e in mesh.triangle_edges(t) {
            let [a, b] = mesh.edges()[e].map(|v| space.node_of_mesh_node(v).expect("vertex of an element"));
            out[nv + e] = 0.5 * (coeffs[a] + coeffs[b]);
        }
    }
    out
}

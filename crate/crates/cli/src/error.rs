use std::fmt;
use std::path::PathBuf;

use channel_fsi::error::{FluidError, FsiError, GeomapError, MeshError, SensitivityError};
use channel_fsi::fluid::mms::StudyError;
use thiserror::Error;

/// One violated configuration invariant, named by its dotted key.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigIssue {
    pub key: String,
    pub reason: String,
}

impl ConfigIssue {
    pub fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.reason)
    }
}

fn join(issues: &[ConfigIssue]) -> String {
    issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {}", join(.0))]
    Config(Vec<ConfigIssue>),
    #[error("cannot read {path}: {reason}")]
    Input { path: PathBuf, reason: String },
    #[error("solver did not converge: {0}")]
    Divergence(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config(vec![ConfigIssue::new(key, reason)])
    }

    /// 2 for bad input, 3 for solver divergence, 4 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input { .. } => 2,
            CliError::Divergence(_) => 3,
            CliError::Internal(_) | CliError::Output { .. } => 4,
        }
    }

    pub fn category(&self) -> &'static str {
        match self.exit_code() {
            2 => "configuration",
            3 => "divergence",
            _ => "internal",
        }
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        match e {
            MeshError::Geometry(g) => CliError::config("geometry", g.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<GeomapError> for CliError {
    fn from(e: GeomapError) -> Self {
        match e {
            GeomapError::Tangled { .. } | GeomapError::NotElliptic { .. } => CliError::Divergence(e.to_string()),
            GeomapError::Fem(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<FluidError> for CliError {
    fn from(e: FluidError) -> Self {
        match e {
            FluidError::Diverged { .. } => CliError::Divergence(e.to_string()),
            FluidError::InflowNotAdmissible(_) => CliError::config("inflow", e.to_string()),
            FluidError::Geomap(g) => g.into(),
            FluidError::Fem(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<FsiError> for CliError {
    fn from(e: FsiError) -> Self {
        match e {
            FsiError::InvalidOptions(m) => CliError::config("coupling", m),
            FsiError::Tangled { .. } | FsiError::Diverged { .. } | FsiError::NotConverged { .. } => {
                CliError::Divergence(e.to_string())
            }
            FsiError::Fluid(f) => f.into(),
            FsiError::Geomap(g) => g.into(),
            FsiError::Fem(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<SensitivityError> for CliError {
    fn from(e: SensitivityError) -> Self {
        match e {
            SensitivityError::NonContraction { .. }
            | SensitivityError::NotConverged { .. }
            | SensitivityError::TooFewSteps(_) => CliError::Divergence(e.to_string()),
            SensitivityError::BadSteps => CliError::config("taylor.steps", e.to_string()),
            SensitivityError::Fsi(f) => f.into(),
            SensitivityError::Fluid(f) => f.into(),
            SensitivityError::Geomap(g) => g.into(),
            SensitivityError::Fem(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::Mesh(m) => m.into(),
            StudyError::Fluid(f) => f.into(),
        }
    }
}

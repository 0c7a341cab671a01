use thiserror::Error;

use crate::mesh::BoundaryTag;
use crate::report::SolverReport;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolverError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("structurally singular: row/column {row} has no nonzero entry")]
    StructurallySingular { row: usize },
    #[error("zero pivot at elimination step {step} (original dof {dof}, |pivot| = {magnitude:e})")]
    ZeroPivot {
        step: usize,
        dof: usize,
        magnitude: f64,
    },
    #[error("relative residual {relative:e} above tolerance after refinement")]
    ResidualTooLarge { relative: f64 },
    #[error("non-finite values in solution")]
    NonFinite,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeometryError {
    #[error("channel dimensions must be positive and finite (length {length}, height {height})")]
    BadChannel { length: f64, height: f64 },
    #[error("target edge length must be positive and finite, got {0}")]
    NonPositiveEdgeLength(f64),
    #[error("obstacle rectangle is degenerate: {0}")]
    DegenerateRect(String),
    #[error("obstacle must keep positive clearance to the channel walls ({side} side)")]
    ObstacleClearance { side: &'static str },
    #[error("inner obstacle boundary must lie strictly inside the outer one ({side} side)")]
    InnerNotContained { side: &'static str },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MeshError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("triangle {0} is not positively oriented")]
    Orientation(usize),
    #[error("boundary edge ({0}, {1}) carries no tag")]
    UntaggedBoundary(usize, usize),
    #[error("edge ({0}, {1}) tagged more than once or tagged while interior")]
    BadTag(usize, usize),
    #[error("interface edge ({0}, {1}) is not shared by one fluid and one solid triangle")]
    NonConformingInterface(usize, usize),
    #[error("tag {tag:?} is not adjacent to the {subdomain} subdomain")]
    TagNotAdjacent { tag: BoundaryTag, subdomain: String },
    #[error("mesh file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FemError {
    #[error("conflicting Dirichlet values at dof {dof}: {first} vs {second}")]
    ConflictingDirichlet { dof: usize, first: f64, second: f64 },
    #[error("non-positive Jacobian determinant {det:e} in fluid element {element}")]
    NonPositiveJacobian { element: usize, det: f64 },
    #[error("coefficient vector has length {got}, space has {expected} dofs")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeomapError {
    #[error("mesh tangling: det DΦ = {det:e} in fluid element {element}")]
    Tangled { element: usize, det: f64 },
    #[error("diffusion field loses ellipticity: min eig(A) = {min_eig:.4} < {beta} in fluid element {element}")]
    NotElliptic {
        element: usize,
        min_eig: f64,
        beta: f64,
    },
    #[error(transparent)]
    Fem(#[from] FemError),
}

#[derive(Debug, Clone, Error)]
pub enum FluidError {
    #[error("nonlinear iteration did not converge in {} iterations", .report.iterations)]
    Diverged { report: SolverReport },
    #[error("inflow profile does not vanish at the ends of the inflow segment (|g| = {0:e})")]
    InflowNotAdmissible(f64),
    #[error(transparent)]
    Geomap(#[from] GeomapError),
    #[error(transparent)]
    Fem(#[from] FemError),
}

impl From<SolverError> for FluidError {
    fn from(e: SolverError) -> Self {
        FluidError::Fem(FemError::Solver(e))
    }
}

impl From<SolverError> for GeomapError {
    fn from(e: SolverError) -> Self {
        GeomapError::Fem(FemError::Solver(e))
    }
}

#[derive(Debug, Clone, Error)]
pub enum FsiError {
    #[error("coupling options invalid: {0}")]
    InvalidOptions(String),
    #[error("mesh tangled at outer iteration {iteration}: {source}")]
    Tangled {
        iteration: usize,
        source: GeomapError,
        /// interface-driving displacement coefficients of the offending iterate
        displacement: Vec<f64>,
    },
    #[error("outer iteration diverged (increment ratio >= 1 for {consecutive} consecutive iterations)")]
    Diverged {
        consecutive: usize,
        report: SolverReport,
    },
    #[error("outer iteration hit the iteration limit ({})", .report.iterations)]
    NotConverged { report: SolverReport },
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Geomap(#[from] GeomapError),
    #[error(transparent)]
    Fem(#[from] FemError),
}

impl From<SolverError> for FsiError {
    fn from(e: SolverError) -> Self {
        FsiError::Fem(FemError::Solver(e))
    }
}

#[derive(Debug, Clone, Error)]
pub enum SensitivityError {
    #[error("derivative fixed point is not contracting (ratio {ratio:.3} >= 1); the base state lies outside the small-data regime")]
    NonContraction { ratio: f64, report: SolverReport },
    #[error("derivative fixed point hit the iteration limit")]
    NotConverged { report: SolverReport },
    #[error("taylor test needs at least 3 valid step sizes, got {0}")]
    TooFewSteps(usize),
    #[error("step sizes must be strictly decreasing and positive")]
    BadSteps,
    #[error(transparent)]
    Fsi(#[from] FsiError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Geomap(#[from] GeomapError),
    #[error(transparent)]
    Fem(#[from] FemError),
}

impl From<SolverError> for SensitivityError {
    fn from(e: SolverError) -> Self {
        SensitivityError::Fem(FemError::Solver(e))
    }
}

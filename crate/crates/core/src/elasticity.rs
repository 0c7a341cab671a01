//! Linear elasticity on the solid annulus: clamped on the inner boundary,
//! loaded by a traction on the interface.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::FemError;
use crate::fem::assembly::{elasticity_matrix, vector_load};
use crate::fem::element::edge_p2_values;
use crate::fem::quadrature::edge_rule;
use crate::fem::space::{boundary_dofs, FeFunction, FeSpace, SpaceDescriptor};
use crate::fem::system::FactoredSystem;
use crate::geomap::InterfaceTrace;
use crate::linalg::csr::norm2;
use crate::linalg::CsrMatrix;
use crate::mesh::{BoundaryTag, Mesh};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LameParameters {
    pub lambda: f64,
    pub mu: f64,
}

impl LameParameters {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(format!("lambda must be non-negative, got {}", self.lambda));
        }
        Ok(())
    }
}

/// Interface load given edge-wise by quadratic nodal values
/// `[start, midpoint, end]`, one entry per interface edge in mesh order.
#[derive(Clone, Debug, PartialEq)]
pub struct TractionTrace {
    pub edges: Vec<[[f64; 2]; 3]>,
}

impl TractionTrace {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            edges: vec![[[0.0; 2]; 3]; mesh.edges_with_tag(BoundaryTag::Interface).count()],
        }
    }

    /// Samples `f(x, n)` at the three edge nodes, `n` the fluid-outward normal.
    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 2], [f64; 2]) -> [f64; 2]) -> Self {
        let edges = mesh
            .edges_with_tag(BoundaryTag::Interface)
            .map(|be| mesh.edge_p2_nodes(be).map(|n| f(mesh.p2_coord(n), be.normal)))
            .collect();
        Self { edges }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            edges: self
                .edges
                .iter()
                .map(|e| e.map(|v| [s * v[0], s * v[1]]))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            edges: self
                .edges
                .iter()
                .zip(&other.edges)
                .map(|(a, b)| [0, 1, 2].map(|k| [a[k][0] + b[k][0], a[k][1] + b[k][1]]))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.edges
            .iter()
            .flatten()
            .flatten()
            .fold(0.0, |m, x| f64::max(m, x.abs()))
    }
}

/// `∫_Γint t·ψ ds` on a vector P2 space adjacent to the interface.
pub fn traction_load(mesh: &Mesh, space: &FeSpace, traction: &TractionTrace) -> Vec<f64> {
    let mut out = vec![0.0; space.n_dofs()];
    for (be, vals) in mesh.edges_with_tag(BoundaryTag::Interface).zip(&traction.edges) {
        let nodes = mesh
            .edge_p2_nodes(be)
            .map(|n| space.node_of_mesh_node(n).expect("interface node outside space"));
        for &(s, w) in edge_rule() {
            let phi = edge_p2_values(s);
            let mut t = [0.0; 2];
            for (p, v) in phi.iter().zip(vals) {
                t[0] += p * v[0];
                t[1] += p * v[1];
            }
            for (k, &n) in nodes.iter().enumerate() {
                out[2 * n] += w * be.length * phi[k] * t[0];
                out[2 * n + 1] += w * be.length * phi[k] * t[1];
            }
        }
    }
    out
}

/// Clamped elasticity operator, factored once.
#[derive(Clone, Debug)]
pub struct ElasticitySolver {
    space: Arc<FeSpace>,
    stiffness: CsrMatrix,
    factored: FactoredSystem,
    clamped: Vec<usize>,
    lame: LameParameters,
}

impl ElasticitySolver {
    pub fn new(mesh: &Mesh, lame: LameParameters) -> Result<Self, FemError> {
        let space = FeSpace::new(mesh, SpaceDescriptor::DISPLACEMENT);
        let stiffness = elasticity_matrix(mesh, &space, lame.lambda, lame.mu);
        let clamped = boundary_dofs(mesh, &space, BoundaryTag::Clamped)?;
        let factored = FactoredSystem::new(&stiffness, &clamped)?;
        Ok(Self {
            space,
            stiffness,
            factored,
            clamped,
            lame,
        })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    /// Unconstrained stiffness matrix.
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn clamped_dofs(&self) -> &[usize] {
        &self.clamped
    }

    pub fn lame(&self) -> LameParameters {
        self.lame
    }

    pub fn load(
        &self,
        mesh: &Mesh,
        body_force: Option<&(dyn Fn([f64; 2]) -> [f64; 2] + Sync)>,
        traction: &TractionTrace,
    ) -> Vec<f64> {
        let mut b = traction_load(mesh, &self.space, traction);
        if let Some(f) = body_force {
            for (bi, v) in b.iter_mut().zip(vector_load(mesh, &self.space, f)) {
                *bi += v;
            }
        }
        b
    }

    /// Displacement for a load vector; clamped dofs are zero.
    pub fn solve_load(&self, load: &[f64]) -> Result<Vec<f64>, FemError> {
        Ok(self.factored.solve_homogeneous(load)?)
    }

    pub fn solve(
        &self,
        mesh: &Mesh,
        body_force: Option<&(dyn Fn([f64; 2]) -> [f64; 2] + Sync)>,
        traction: &TractionTrace,
    ) -> Result<FeFunction, FemError> {
        let u = self.solve_load(&self.load(mesh, body_force, traction))?;
        FeFunction::new(Arc::clone(&self.space), u)
    }

    /// `‖K u − b‖ / max(‖b‖, tiny)` over unclamped rows.
    pub fn relative_residual(&self, u: &[f64], load: &[f64]) -> f64 {
        let mut r = self.stiffness.mul_vec(u);
        for (ri, bi) in r.iter_mut().zip(load) {
            *ri -= bi;
        }
        for &d in &self.clamped {
            r[d] = 0.0;
        }
        norm2(&r) / norm2(load).max(f64::MIN_POSITIVE)
    }
}

/// One-shot elasticity solve.
pub fn solve_elasticity(
    mesh: &Mesh,
    body_force: Option<&(dyn Fn([f64; 2]) -> [f64; 2] + Sync)>,
    traction: &TractionTrace,
    lame: LameParameters,
) -> Result<FeFunction, FemError> {
    ElasticitySolver::new(mesh, lame)?.solve(mesh, body_force, traction)
}

/// Restriction of a displacement to the interface nodes.
pub fn interface_trace(mesh: &Mesh, u: &FeFunction) -> InterfaceTrace {
    InterfaceTrace::from_field(mesh, u.space(), u.coeffs())
}

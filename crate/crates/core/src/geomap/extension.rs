use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{FemError, GeomapError};
use crate::fem::assembly::vector_laplace_matrix;
use crate::fem::space::{FeFunction, FeSpace};
use crate::fem::system::{Constraints, FactoredSystem};
use crate::mesh::{BoundaryTag, Mesh};

use super::fields::{TransformFields, ELLIPTICITY_FLOOR};

/// Sorted P2 mesh node ids on the fluid–solid interface.
pub fn interface_nodes(mesh: &Mesh) -> Vec<usize> {
    let set: BTreeSet<usize> = mesh
        .edges_with_tag(BoundaryTag::Interface)
        .flat_map(|be| mesh.edge_p2_nodes(be))
        .collect();
    set.into_iter().collect()
}

/// Vector values at the interface nodes, ordered as [`interface_nodes`].
#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceTrace {
    pub nodes: Arc<Vec<usize>>,
    pub values: Vec<[f64; 2]>,
}

impl InterfaceTrace {
    pub fn zeros(mesh: &Mesh) -> Self {
        let nodes = interface_nodes(mesh);
        let values = vec![[0.0; 2]; nodes.len()];
        Self {
            nodes: Arc::new(nodes),
            values,
        }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let nodes = interface_nodes(mesh);
        let values = nodes.iter().map(|&n| f(mesh.p2_coord(n))).collect();
        Self {
            nodes: Arc::new(nodes),
            values,
        }
    }

    /// Restriction of a vector field on `space` to the interface nodes.
    pub fn from_field(mesh: &Mesh, space: &FeSpace, coeffs: &[f64]) -> Self {
        let nodes = interface_nodes(mesh);
        let values = nodes
            .iter()
            .map(|&n| {
                let s = space.node_of_mesh_node(n).expect("interface node outside space");
                [coeffs[2 * s], coeffs[2 * s + 1]]
            })
            .collect();
        Self {
            nodes: Arc::new(nodes),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0, |m, x| f64::max(m, x.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            nodes: Arc::clone(&self.nodes),
            values: self.values.iter().map(|v| [s * v[0], s * v[1]]).collect(),
        }
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        Self {
            nodes: Arc::clone(&self.nodes),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| [a[0] + s * b[0], a[1] + s * b[1]])
                .collect(),
        }
    }
}

/// Componentwise discrete Laplace lifting of interface data into the fluid
/// domain, zero on the exterior boundary. Factored once.
#[derive(Clone, Debug)]
pub struct HarmonicExtension {
    space: Arc<FeSpace>,
    solver: FactoredSystem,
    /// (space node, trace index) pairs
    interface: Vec<(usize, usize)>,
    exterior: Vec<usize>,
}

impl HarmonicExtension {
    pub fn new(mesh: &Mesh, space: Arc<FeSpace>) -> Result<Self, FemError> {
        let a = vector_laplace_matrix(mesh, &space);
        let mut exterior = BTreeSet::new();
        for tag in [BoundaryTag::Inflow, BoundaryTag::Wall, BoundaryTag::Outflow] {
            exterior.extend(space.boundary_nodes(mesh, tag)?);
        }
        let trace_nodes = interface_nodes(mesh);
        let interface: Vec<(usize, usize)> = trace_nodes
            .iter()
            .enumerate()
            .map(|(k, &n)| (space.node_of_mesh_node(n).expect("interface node"), k))
            .collect();
        let mut dofs: Vec<usize> = exterior
            .iter()
            .chain(interface.iter().map(|(s, _)| s))
            .flat_map(|&n| [2 * n, 2 * n + 1])
            .collect();
        dofs.sort_unstable();
        dofs.dedup();
        let solver = FactoredSystem::new(&a, &dofs)?;
        Ok(Self {
            space,
            solver,
            interface,
            exterior: exterior.into_iter().collect(),
        })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn constraints(&self, trace: &InterfaceTrace) -> Result<Constraints, FemError> {
        let mut c = Constraints::new();
        for &n in &self.exterior {
            c.set(2 * n, 0.0)?;
            c.set(2 * n + 1, 0.0)?;
        }
        for &(s, k) in &self.interface {
            let v = trace.values[k];
            c.set(2 * s, v[0])?;
            c.set(2 * s + 1, v[1])?;
        }
        Ok(c)
    }

    pub fn extend(&self, trace: &InterfaceTrace) -> Result<Vec<f64>, FemError> {
        let c = self.constraints(trace)?;
        Ok(self.solver.solve(&vec![0.0; self.space.n_dofs()], &c)?)
    }
}

/// One-shot harmonic extension.
pub fn harmonic_extension(mesh: &Mesh, space: Arc<FeSpace>, trace: &InterfaceTrace) -> Result<FeFunction, FemError> {
    let ext = HarmonicExtension::new(mesh, Arc::clone(&space))?;
    let coeffs = ext.extend(trace)?;
    FeFunction::new(space, coeffs)
}

/// Nodal values of `Φ = id + φ`, with `φ` the harmonic extension.
pub fn flow_map(mesh: &Mesh, ext: &HarmonicExtension, trace: &InterfaceTrace) -> Result<FeFunction, FemError> {
    let phi = ext.extend(trace)?;
    let space = Arc::clone(ext.space());
    let coords = space.node_coords(mesh);
    let mut map = phi;
    for (n, x) in coords.iter().enumerate() {
        map[2 * n] += x[0];
        map[2 * n + 1] += x[1];
    }
    FeFunction::new(space, map)
}

/// Pullback fields of a flow map given by nodal values, with the
/// admissibility checks (`det > 0`, ellipticity floor).
pub fn transform_fields(mesh: &Mesh, map: &FeFunction) -> Result<TransformFields, GeomapError> {
    let space = map.space();
    let coords = space.node_coords(mesh);
    let mut phi = map.coeffs().to_vec();
    for (n, x) in coords.iter().enumerate() {
        phi[2 * n] -= x[0];
        phi[2 * n + 1] -= x[1];
    }
    let fields = TransformFields::from_displacement_field(mesh, space, &phi);
    fields.check_admissible(ELLIPTICITY_FLOOR)?;
    Ok(fields)
}

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{FemError, MeshError};
use crate::mesh::{BoundaryTag, Mesh, Subdomain};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Order {
    P1,
    P2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arity {
    Scalar,
    Vector,
}

impl Arity {
    pub fn components(self) -> usize {
        match self {
            Arity::Scalar => 1,
            Arity::Vector => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceDescriptor {
    pub order: Order,
    pub arity: Arity,
    pub subdomain: Subdomain,
}

impl SpaceDescriptor {
    pub const VELOCITY: Self = Self {
        order: Order::P2,
        arity: Arity::Vector,
        subdomain: Subdomain::Fluid,
    };
    pub const PRESSURE: Self = Self {
        order: Order::P1,
        arity: Arity::Scalar,
        subdomain: Subdomain::Fluid,
    };
    pub const DISPLACEMENT: Self = Self {
        order: Order::P2,
        arity: Arity::Vector,
        subdomain: Subdomain::Solid,
    };
    /// Harmonic extension of the interface displacement; same layout as velocity.
    pub const EXTENSION: Self = Self::VELOCITY;
}

/// Degree-of-freedom map of a space on one subdomain of a mesh.
/// Vector dofs are interleaved: `dof = 2 * node + component`.
#[derive(Debug)]
pub struct FeSpace {
    desc: SpaceDescriptor,
    elements: Vec<usize>,
    /// mesh node (vertex or P2 node id) -> space node
    node_of: Vec<Option<usize>>,
    /// space node -> mesh node
    nodes: Vec<usize>,
}

impl FeSpace {
    pub fn new(mesh: &Mesh, desc: SpaceDescriptor) -> Arc<Self> {
        let elements: Vec<usize> = (0..mesh.n_triangles())
            .filter(|&t| mesh.subdomains()[t] == desc.subdomain)
            .collect();
        let n_mesh_nodes = match desc.order {
            Order::P1 => mesh.n_vertices(),
            Order::P2 => mesh.n_p2_nodes(),
        };
        let mut used = vec![false; n_mesh_nodes];
        for &t in &elements {
            for n in Self::mesh_nodes_of(mesh, desc.order, t) {
                used[n] = true;
            }
        }
        let mut node_of = vec![None; n_mesh_nodes];
        let mut nodes = Vec::new();
        for (n, &u) in used.iter().enumerate() {
            if u {
                node_of[n] = Some(nodes.len());
                nodes.push(n);
            }
        }
        Arc::new(Self {
            desc,
            elements,
            node_of,
            nodes,
        })
    }

    fn mesh_nodes_of(mesh: &Mesh, order: Order, t: usize) -> Vec<usize> {
        match order {
            Order::P1 => mesh.triangles()[t].to_vec(),
            Order::P2 => mesh.p2_nodes(t).to_vec(),
        }
    }

    pub fn descriptor(&self) -> SpaceDescriptor {
        self.desc
    }

    pub fn components(&self) -> usize {
        self.desc.arity.components()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.nodes.len() * self.components()
    }

    /// Mesh triangles of this space's subdomain, in ascending order.
    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn node_of_mesh_node(&self, mesh_node: usize) -> Option<usize> {
        self.node_of.get(mesh_node).copied().flatten()
    }

    pub fn mesh_node(&self, node: usize) -> usize {
        self.nodes[node]
    }

    /// Space nodes of a P2 element (six entries).
    pub fn p2_element_nodes(&self, mesh: &Mesh, t: usize) -> [usize; 6] {
        debug_assert_eq!(self.desc.order, Order::P2);
        mesh.p2_nodes(t).map(|n| self.node_of[n].expect("element outside space"))
    }

    /// Space nodes of a P1 element (three entries).
    pub fn p1_element_nodes(&self, mesh: &Mesh, t: usize) -> [usize; 3] {
        debug_assert_eq!(self.desc.order, Order::P1);
        mesh.triangles()[t].map(|n| self.node_of[n].expect("element outside space"))
    }

    /// Interleaved dofs of a vector P2 element: `[2n0, 2n0+1, 2n1, ...]`.
    pub fn vector_element_dofs(&self, mesh: &Mesh, t: usize) -> [usize; 12] {
        let n = self.p2_element_nodes(mesh, t);
        let mut d = [0usize; 12];
        for i in 0..6 {
            d[2 * i] = 2 * n[i];
            d[2 * i + 1] = 2 * n[i] + 1;
        }
        d
    }

    /// Coordinates of every space node.
    pub fn node_coords(&self, mesh: &Mesh) -> Vec<[f64; 2]> {
        self.nodes
            .iter()
            .map(|&n| match self.desc.order {
                Order::P1 => mesh.nodes()[n],
                Order::P2 => mesh.p2_coord(n),
            })
            .collect()
    }

    /// Nodes lying on edges carrying `tag`, sorted.
    pub fn boundary_nodes(&self, mesh: &Mesh, tag: BoundaryTag) -> Result<Vec<usize>, FemError> {
        if !tag.is_adjacent_to(self.desc.subdomain) {
            return Err(MeshError::TagNotAdjacent {
                tag,
                subdomain: self.desc.subdomain.to_string(),
            }
            .into());
        }
        let mut set = BTreeSet::new();
        for be in mesh.edges_with_tag(tag) {
            let ids: Vec<usize> = match self.desc.order {
                Order::P1 => be.nodes.to_vec(),
                Order::P2 => mesh.edge_p2_nodes(be).to_vec(),
            };
            for n in ids {
                if let Some(s) = self.node_of[n] {
                    set.insert(s);
                }
            }
        }
        Ok(set.into_iter().collect())
    }

    /// Interpolates a function at every node.
    pub fn interpolate(&self, mesh: &Mesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let c = self.components();
        let mut out = vec![0.0; self.n_dofs()];
        for (i, x) in self.node_coords(mesh).into_iter().enumerate() {
            let v = f(x);
            out[c * i..c * i + c].copy_from_slice(&v[..c]);
        }
        out
    }
}

/// All dofs whose nodal points lie on edges of `tag`. Corner nodes shared by
/// two tags appear in both sets; see [`BoundaryTag::dirichlet_priority`].
pub fn boundary_dofs(mesh: &Mesh, space: &FeSpace, tag: BoundaryTag) -> Result<Vec<usize>, FemError> {
    let c = space.components();
    Ok(space
        .boundary_nodes(mesh, tag)?
        .into_iter()
        .flat_map(|n| (0..c).map(move |k| c * n + k))
        .collect())
}

/// Coefficient vector tied to a space.
#[derive(Clone, Debug)]
pub struct FeFunction {
    space: Arc<FeSpace>,
    coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn new(space: Arc<FeSpace>, coeffs: Vec<f64>) -> Result<Self, FemError> {
        if coeffs.len() != space.n_dofs() {
            return Err(FemError::LengthMismatch {
                expected: space.n_dofs(),
                got: coeffs.len(),
            });
        }
        Ok(Self { space, coeffs })
    }

    pub fn zeros(space: Arc<FeSpace>) -> Self {
        let n = space.n_dofs();
        Self {
            space,
            coeffs: vec![0.0; n],
        }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Vector value at a space node.
    pub fn node_vector(&self, node: usize) -> [f64; 2] {
        [self.coeffs[2 * node], self.coeffs[2 * node + 1]]
    }
}

/// Local node values of a vector P2 field on element `t`.
pub fn local_vector(space: &FeSpace, mesh: &Mesh, coeffs: &[f64], t: usize) -> [[f64; 2]; 6] {
    space
        .p2_element_nodes(mesh, t)
        .map(|n| [coeffs[2 * n], coeffs[2 * n + 1]])
}

/// Local node values of a scalar P1 field on element `t`.
pub fn local_scalar(space: &FeSpace, mesh: &Mesh, coeffs: &[f64], t: usize) -> [f64; 3] {
    space.p1_element_nodes(mesh, t).map(|n| coeffs[n])
}

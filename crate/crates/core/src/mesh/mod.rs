//! Two-subdomain channel triangulation with tagged boundary segments.
//!
//! Node numbering of the quadratic ("P2") node set used by the finite
//! element spaces: mesh vertices first, then one node per edge midpoint
//! (`n_vertices + edge_index`).

mod build;
pub mod io;
mod validate;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::MeshError;

pub use build::{build_channel_mesh, refine_uniform, ChannelGeometry, Obstacle, Rect};
pub use validate::{validate, ValidationReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subdomain {
    Fluid,
    Solid,
}

impl fmt::Display for Subdomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subdomain::Fluid => "fluid",
            Subdomain::Solid => "solid",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Inflow,
    Wall,
    Outflow,
    /// fluid–solid interface, the obstacle's outer boundary at rest
    Interface,
    /// inner boundary of the elastic annulus, where the solid is clamped
    Clamped,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 5] = [
        BoundaryTag::Inflow,
        BoundaryTag::Wall,
        BoundaryTag::Outflow,
        BoundaryTag::Interface,
        BoundaryTag::Clamped,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Inflow => "inflow",
            BoundaryTag::Wall => "wall",
            BoundaryTag::Outflow => "outflow",
            BoundaryTag::Interface => "interface",
            BoundaryTag::Clamped => "clamped",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }

    /// Whether edges with this tag bound the given subdomain.
    pub fn is_adjacent_to(self, sub: Subdomain) -> bool {
        match sub {
            Subdomain::Fluid => !matches!(self, BoundaryTag::Clamped),
            Subdomain::Solid => matches!(self, BoundaryTag::Interface | BoundaryTag::Clamped),
        }
    }

    /// Priority when a node lies on edges of several Dirichlet tags:
    /// wall > inflow > interface. Higher wins.
    pub fn dirichlet_priority(self) -> u8 {
        match self {
            BoundaryTag::Wall => 3,
            BoundaryTag::Inflow => 2,
            BoundaryTag::Interface => 1,
            BoundaryTag::Clamped => 4,
            BoundaryTag::Outflow => 0,
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A tagged boundary (or interface) edge with derived geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
    /// index into [`Mesh::edges`]
    pub edge: usize,
    /// adjacent triangle; the fluid one for interface edges
    pub triangle: usize,
    /// unit normal pointing out of `triangle`
    pub normal: [f64; 2],
    pub length: f64,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    subdomains: Vec<Subdomain>,
    boundary_edges: Vec<BoundaryEdge>,
    edges: Vec<[usize; 2]>,
    edge_lookup: HashMap<(usize, usize), usize>,
    tri_edges: Vec<[usize; 3]>,
    edge_tris: Vec<[Option<usize>; 2]>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds connectivity from raw parts. Tagged edges are given as node
    /// pairs in any orientation. Structural checks (orientation, tag
    /// coverage, interface conformity) are performed by [`validate`].
    pub fn from_parts(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        subdomains: Vec<Subdomain>,
        tagged: Vec<([usize; 2], BoundaryTag)>,
    ) -> Result<Self, MeshError> {
        assert_eq!(triangles.len(), subdomains.len());
        let mut edges = Vec::new();
        let mut edge_lookup = HashMap::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        let mut edge_tris: Vec<[Option<usize>; 2]> = Vec::new();
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let e = *edge_lookup.entry(key(a, b)).or_insert_with(|| {
                    edges.push([a.min(b), a.max(b)]);
                    edge_tris.push([None, None]);
                    edges.len() - 1
                });
                te[k] = e;
                let slot = &mut edge_tris[e];
                if slot[0].is_none() {
                    slot[0] = Some(t);
                } else {
                    slot[1] = Some(t);
                }
            }
            tri_edges.push(te);
        }

        let mut boundary_edges = Vec::with_capacity(tagged.len());
        for ([a, b], tag) in tagged {
            let e = *edge_lookup
                .get(&key(a, b))
                .ok_or(MeshError::BadTag(a, b))?;
            let [t0, t1] = edge_tris[e];
            let triangle = match (t0, t1) {
                (Some(t), None) => t,
                (Some(t), Some(s)) => {
                    if subdomains[t] == Subdomain::Fluid {
                        t
                    } else {
                        s
                    }
                }
                _ => return Err(MeshError::BadTag(a, b)),
            };
            let pa = nodes[a];
            let pb = nodes[b];
            let d = [pb[0] - pa[0], pb[1] - pa[1]];
            let length = (d[0] * d[0] + d[1] * d[1]).sqrt();
            let mut normal = [d[1] / length, -d[0] / length];
            // orient away from the adjacent triangle's opposite vertex
            let tri = triangles[triangle];
            let opp = tri.iter().copied().find(|&v| v != a && v != b).unwrap();
            let po = nodes[opp];
            if (po[0] - pa[0]) * normal[0] + (po[1] - pa[1]) * normal[1] > 0.0 {
                normal = [-normal[0], -normal[1]];
            }
            boundary_edges.push(BoundaryEdge {
                nodes: [a, b],
                tag,
                edge: e,
                triangle,
                normal,
                length,
            });
        }
        Ok(Self {
            nodes,
            triangles,
            subdomains,
            boundary_edges,
            edges,
            edge_lookup,
            tri_edges,
            edge_tris,
        })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subdomains
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&key(a, b)).copied()
    }

    /// Edge indices of triangle `t`; local edge `k` joins vertex `k` and `k+1`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn edge_triangles(&self, e: usize) -> [Option<usize>; 2] {
        self.edge_tris[e]
    }

    pub fn n_vertices(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Number of P2 nodes (vertices plus edge midpoints).
    pub fn n_p2_nodes(&self) -> usize {
        self.nodes.len() + self.edges.len()
    }

    /// The six P2 node ids of triangle `t`: vertices, then midpoints of
    /// edges (0,1), (1,2), (2,0).
    pub fn p2_nodes(&self, t: usize) -> [usize; 6] {
        let v = self.triangles[t];
        let e = self.tri_edges[t];
        let nv = self.nodes.len();
        [v[0], v[1], v[2], nv + e[0], nv + e[1], nv + e[2]]
    }

    /// P2 node ids of an edge in order (start, midpoint, end).
    pub fn edge_p2_nodes(&self, be: &BoundaryEdge) -> [usize; 3] {
        [be.nodes[0], self.nodes.len() + be.edge, be.nodes[1]]
    }

    pub fn p2_coord(&self, node: usize) -> [f64; 2] {
        let nv = self.nodes.len();
        if node < nv {
            self.nodes[node]
        } else {
            let [a, b] = self.edges[node - nv];
            let (pa, pb) = (self.nodes[a], self.nodes[b]);
            [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
        }
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn subdomain_area(&self, sub: Subdomain) -> f64 {
        (0..self.n_triangles())
            .filter(|&t| self.subdomains[t] == sub)
            .map(|t| self.triangle_area(t))
            .sum()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges
            .iter()
            .map(|&[a, b]| {
                let (pa, pb) = (self.nodes[a], self.nodes[b]);
                ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.boundary_edges.iter().any(|e| e.tag == tag)
    }

    /// Bounding box `(xmin, ymin, xmax, ymax)` of all vertices.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        self.nodes.iter().fold(
            (f64::MAX, f64::MAX, f64::MIN, f64::MIN),
            |(x0, y0, x1, y1), p| (x0.min(p[0]), y0.min(p[1]), x1.max(p[0]), y1.max(p[1])),
        )
    }

    /// Permutation of P2 nodes realizing the reflection `y ↦ y_mid*2 - y`
    /// across the horizontal mid-line of the bounding box, if the mesh is
    /// mirror-symmetric (including subdomain labels and tags).
    pub fn mirror_permutation(&self) -> Option<Vec<usize>> {
        let (_, y0, _, y1) = self.bounding_box();
        let mirror = |p: [f64; 2]| [p[0], y0 + y1 - p[1]];
        let scale = (y1 - y0).max(1.0);
        let tol = 1e-12 * scale;
        let quant = |p: [f64; 2]| ((p[0] / tol).round() as i64, (p[1] / tol).round() as i64);
        let mut lookup: HashMap<(i64, i64), usize> = HashMap::new();
        for (i, &p) in self.nodes.iter().enumerate() {
            lookup.insert(quant(p), i);
        }
        let mut vperm = Vec::with_capacity(self.nodes.len());
        for &p in &self.nodes {
            let m = mirror(p);
            let q = quant(m);
            // tolerate rounding across the quantization cell boundary
            let hit = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .find_map(|(dx, dy)| lookup.get(&(q.0 + dx, q.1 + dy)))?;
            vperm.push(*hit);
        }
        let nv = self.nodes.len();
        let mut perm: Vec<usize> = vperm.clone();
        for &[a, b] in &self.edges {
            let e = self.edge_index(vperm[a], vperm[b])?;
            perm.push(nv + e);
        }
        // subdomain labels must be preserved
        let mut tri_lookup: HashMap<[usize; 3], Subdomain> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            let mut s = *tri;
            s.sort_unstable();
            tri_lookup.insert(s, self.subdomains[t]);
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            let mut m = [vperm[tri[0]], vperm[tri[1]], vperm[tri[2]]];
            m.sort_unstable();
            if tri_lookup.get(&m) != Some(&self.subdomains[t]) {
                return None;
            }
        }
        let mut tag_lookup: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
        for be in &self.boundary_edges {
            tag_lookup.insert(key(be.nodes[0], be.nodes[1]), be.tag);
        }
        for be in &self.boundary_edges {
            let k = key(vperm[be.nodes[0]], vperm[be.nodes[1]]);
            if tag_lookup.get(&k) != Some(&be.tag) {
                return None;
            }
        }
        Some(perm)
    }
}

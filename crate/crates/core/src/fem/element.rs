//! Lagrange bases on the reference triangle and affine element geometry.
//!
//! Local P2 node order: vertices 0, 1, 2, then midpoints of edges
//! (0,1), (1,2), (2,0).

use std::sync::OnceLock;

use super::quadrature::{triangle_rule, NQ};
use crate::linalg::Mat2;
use crate::mesh::Mesh;

const GRAD_L: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
const EDGE_PAIRS: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

fn barycentric(x: [f64; 2]) -> [f64; 3] {
    [1.0 - x[0] - x[1], x[0], x[1]]
}

pub fn p1_values(x: [f64; 2]) -> [f64; 3] {
    barycentric(x)
}

pub fn p2_values(x: [f64; 2]) -> [f64; 6] {
    let l = barycentric(x);
    let mut v = [0.0; 6];
    for i in 0..3 {
        v[i] = l[i] * (2.0 * l[i] - 1.0);
    }
    for (k, &(a, b)) in EDGE_PAIRS.iter().enumerate() {
        v[3 + k] = 4.0 * l[a] * l[b];
    }
    v
}

/// Gradients of the P2 basis with respect to reference coordinates.
pub fn p2_ref_grads(x: [f64; 2]) -> [[f64; 2]; 6] {
    let l = barycentric(x);
    let mut g = [[0.0; 2]; 6];
    for i in 0..3 {
        let s = 4.0 * l[i] - 1.0;
        g[i] = [s * GRAD_L[i][0], s * GRAD_L[i][1]];
    }
    for (k, &(a, b)) in EDGE_PAIRS.iter().enumerate() {
        g[3 + k] = [
            4.0 * (l[b] * GRAD_L[a][0] + l[a] * GRAD_L[b][0]),
            4.0 * (l[b] * GRAD_L[a][1] + l[a] * GRAD_L[b][1]),
        ];
    }
    g
}

/// Constant reference Hessians of the P2 basis.
pub fn p2_ref_hessians() -> [Mat2; 6] {
    let mut h = [Mat2::ZERO; 6];
    for i in 0..3 {
        h[i] = Mat2::outer(GRAD_L[i], GRAD_L[i]).scale(4.0);
    }
    for (k, &(a, b)) in EDGE_PAIRS.iter().enumerate() {
        h[3 + k] = (Mat2::outer(GRAD_L[a], GRAD_L[b]) + Mat2::outer(GRAD_L[b], GRAD_L[a])).scale(4.0);
    }
    h
}

/// Quadratic 1D basis on an edge parametrized by `s ∈ [0, 1]`, node order
/// (start, midpoint, end).
pub fn edge_p2_values(s: f64) -> [f64; 3] {
    [(1.0 - s) * (1.0 - 2.0 * s), 4.0 * s * (1.0 - s), s * (2.0 * s - 1.0)]
}

pub fn edge_p1_values(s: f64) -> [f64; 2] {
    [1.0 - s, s]
}

struct Tables {
    p1: [[f64; 3]; NQ],
    p2: [[f64; 6]; NQ],
    p2_grad: [[[f64; 2]; 6]; NQ],
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let rule = triangle_rule();
        let mut t = Tables {
            p1: [[0.0; 3]; NQ],
            p2: [[0.0; 6]; NQ],
            p2_grad: [[[0.0; 2]; 6]; NQ],
        };
        for (q, &(x, _)) in rule.iter().enumerate() {
            t.p1[q] = p1_values(x);
            t.p2[q] = p2_values(x);
            t.p2_grad[q] = p2_ref_grads(x);
        }
        t
    })
}

/// Affine triangle with basis data at the quadrature points.
#[derive(Clone, Debug)]
pub struct Element {
    pub vertices: [[f64; 2]; 3],
    pub area: f64,
    /// `B⁻ᵀ`, mapping reference gradients to physical ones
    pub inv_t: Mat2,
}

impl Element {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        let tri = mesh.triangles()[t];
        let v = [mesh.nodes()[tri[0]], mesh.nodes()[tri[1]], mesh.nodes()[tri[2]]];
        Self::from_vertices(v)
    }

    pub fn from_vertices(v: [[f64; 2]; 3]) -> Self {
        let b = Mat2::new(v[1][0] - v[0][0], v[2][0] - v[0][0], v[1][1] - v[0][1], v[2][1] - v[0][1]);
        let det = b.det();
        let inv_t = b.inverse().expect("degenerate triangle").transpose();
        Self {
            vertices: v,
            area: 0.5 * det,
            inv_t,
        }
    }

    pub fn map(&self, x: [f64; 2]) -> [f64; 2] {
        let l = barycentric(x);
        let v = &self.vertices;
        [
            l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
            l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
        ]
    }

    /// Physical quadrature points and weights (weights sum to the area).
    pub fn quadrature(&self) -> [([f64; 2], f64); NQ] {
        let mut out = [([0.0; 2], 0.0); NQ];
        for (o, &(x, w)) in out.iter_mut().zip(triangle_rule()) {
            *o = (self.map(x), w * self.area);
        }
        out
    }

    pub fn weight(&self, q: usize) -> f64 {
        triangle_rule()[q].1 * self.area
    }

    pub fn p1_grads(&self) -> [[f64; 2]; 3] {
        GRAD_L.map(|g| self.inv_t.mul_vec(g))
    }

    pub fn p1_at(&self, q: usize) -> &'static [f64; 3] {
        &tables().p1[q]
    }

    pub fn p2_at(&self, q: usize) -> &'static [f64; 6] {
        &tables().p2[q]
    }

    pub fn p2_grads_at(&self, q: usize) -> [[f64; 2]; 6] {
        tables().p2_grad[q].map(|g| self.inv_t.mul_vec(g))
    }

    pub fn p2_grads_ref_point(&self, x: [f64; 2]) -> [[f64; 2]; 6] {
        p2_ref_grads(x).map(|g| self.inv_t.mul_vec(g))
    }

    /// Constant physical Hessians of the P2 basis.
    pub fn p2_hessians(&self) -> [Mat2; 6] {
        let b_inv = self.inv_t.transpose();
        p2_ref_hessians().map(|h| self.inv_t * h * b_inv)
    }
}

/// Gradient `(Dv)_ij = ∂_j v_i` of a P2 vector field with local node values `vals`.
pub fn vector_gradient(vals: &[[f64; 2]; 6], grads: &[[f64; 2]; 6]) -> Mat2 {
    let mut m = Mat2::ZERO;
    for (v, g) in vals.iter().zip(grads) {
        m = m + Mat2::outer(*v, *g);
    }
    m
}

pub fn vector_value(vals: &[[f64; 2]; 6], phi: &[f64; 6]) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (v, &p) in vals.iter().zip(phi) {
        out[0] += p * v[0];
        out[1] += p * v[1];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p2_basis_is_nodal() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];
        for (i, &p) in pts.iter().enumerate() {
            let v = p2_values(p);
            for (j, &vj) in v.iter().enumerate() {
                assert_eq!(vj, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn p2_gradients_match_finite_differences() {
        let x = [0.23, 0.41];
        let g = p2_ref_grads(x);
        let h = 1e-6;
        for d in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[d] += h;
            xm[d] -= h;
            let (vp, vm) = (p2_values(xp), p2_values(xm));
            for i in 0..6 {
                assert!(((vp[i] - vm[i]) / (2.0 * h) - g[i][d]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn unit_right_triangle_p1_stiffness() {
        let e = Element::from_vertices([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let g = e.p1_grads();
        let k: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| e.area * (g[i][0] * g[j][0] + g[i][1] * g[j][1])).collect())
            .collect();
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - expected[i][j]).abs() < 1e-15);
            }
        }
    }
}

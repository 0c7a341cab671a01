//! Element loops for every bilinear and linear form of the solver.
//!
//! Gradient convention for vector fields: `(Dv)_ij = ∂_j v_i`.
//! Element contributions are computed in parallel and scattered in element
//! order, so results do not depend on the number of threads.

use std::sync::Arc;

use rayon::prelude::*;

use super::element::{edge_p2_values, vector_gradient, vector_value, Element};
use super::quadrature::{edge_rule, NQ};
use super::space::{local_vector, FeSpace, SpaceDescriptor};
use super::system::SaddleSystem;
use crate::error::FemError;
use crate::geomap::{QpTransform, TransformFields};
use crate::linalg::{CsrMatrix, Mat2, TripletBuilder};
use crate::mesh::{BoundaryTag, Mesh};

/// Dense element block with its global row and column dofs.
#[derive(Clone, Debug)]
pub struct LocalMatrix {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    /// row-major, `rows.len() × cols.len()`
    pub values: Vec<f64>,
}

impl LocalMatrix {
    pub fn zeros(rows: Vec<usize>, cols: Vec<usize>) -> Self {
        let n = rows.len() * cols.len();
        Self {
            rows,
            cols,
            values: vec![0.0; n],
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let nc = self.cols.len();
        self.values[i * nc + j] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols.len() + j]
    }
}

/// Sums element blocks into a sparse matrix.
pub fn assemble_matrix<F>(nrows: usize, ncols: usize, n_elements: usize, kernel: F) -> CsrMatrix
where
    F: Fn(usize) -> LocalMatrix + Sync + Send,
{
    let locals: Vec<LocalMatrix> = (0..n_elements).into_par_iter().map(kernel).collect();
    let cap = locals.iter().map(|l| l.values.len()).sum();
    let mut b = TripletBuilder::with_capacity(nrows, ncols, cap);
    for l in &locals {
        for (i, &r) in l.rows.iter().enumerate() {
            for (j, &c) in l.cols.iter().enumerate() {
                let v = l.values[i * l.cols.len() + j];
                if v != 0.0 {
                    b.push(r, c, v);
                }
            }
        }
    }
    b.build()
}

/// Sums element vectors `(dofs, values)` into a dense vector.
pub fn assemble_vector<F>(n: usize, n_elements: usize, kernel: F) -> Vec<f64>
where
    F: Fn(usize) -> (Vec<usize>, Vec<f64>) + Sync + Send,
{
    let locals: Vec<(Vec<usize>, Vec<f64>)> = (0..n_elements).into_par_iter().map(kernel).collect();
    let mut out = vec![0.0; n];
    for (dofs, vals) in &locals {
        for (&d, &v) in dofs.iter().zip(vals) {
            out[d] += v;
        }
    }
    out
}

/// Taylor–Hood pair on the fluid subdomain. Saddle-system dofs: velocity
/// first, then pressure shifted by `n_velocity()`.
#[derive(Clone, Debug)]
pub struct FluidSpaces {
    pub velocity: Arc<FeSpace>,
    pub pressure: Arc<FeSpace>,
}

impl FluidSpaces {
    pub fn new(mesh: &Mesh) -> Self {
        Self {
            velocity: FeSpace::new(mesh, SpaceDescriptor::VELOCITY),
            pressure: FeSpace::new(mesh, SpaceDescriptor::PRESSURE),
        }
    }

    pub fn n_velocity(&self) -> usize {
        self.velocity.n_dofs()
    }

    pub fn n_pressure(&self) -> usize {
        self.pressure.n_dofs()
    }

    pub fn dim(&self) -> usize {
        self.n_velocity() + self.n_pressure()
    }

    pub fn n_elements(&self) -> usize {
        self.velocity.elements().len()
    }

    /// Local velocity dofs (12) followed by shifted pressure dofs (3).
    pub fn element_dofs(&self, mesh: &Mesh, t: usize) -> Vec<usize> {
        let mut d = self.velocity.vector_element_dofs(mesh, t).to_vec();
        let nu = self.n_velocity();
        d.extend(self.pressure.p1_element_nodes(mesh, t).map(|n| nu + n));
        d
    }

    pub fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(self.n_velocity())
    }
}

/// Plain Stokes operator `ν∫∇w:∇ψ − ∫p div ψ + ∫q div w`, coded without
/// any transform data.
pub fn stokes_matrix(mesh: &Mesh, spaces: &FluidSpaces, nu: f64) -> CsrMatrix {
    let n = spaces.dim();
    let elements = spaces.velocity.elements();
    assemble_matrix(n, n, elements.len(), |e| {
        let t = elements[e];
        let el = Element::new(mesh, t);
        let dofs = spaces.element_dofs(mesh, t);
        let mut m = LocalMatrix::zeros(dofs.clone(), dofs);
        for q in 0..NQ {
            let w = el.weight(q);
            let g = el.p2_grads_at(q);
            let chi = el.p1_at(q);
            for i in 0..6 {
                for j in 0..6 {
                    let s = nu * w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                    m.add(2 * i, 2 * j, s);
                    m.add(2 * i + 1, 2 * j + 1, s);
                }
                for (k, &c) in chi.iter().enumerate() {
                    for d in 0..2 {
                        m.add(2 * i + d, 12 + k, -w * c * g[i][d]);
                        m.add(12 + k, 2 * i + d, w * c * g[i][d]);
                    }
                }
            }
        }
        m
    })
}

pub(crate) fn transform_at(fields: Option<&TransformFields>, e: usize, q: usize) -> &QpTransform {
    match fields {
        Some(f) => f.at(e, q),
        None => &QpTransform::IDENTITY,
    }
}

fn check_positive(fields: Option<&TransformFields>) -> Result<(), FemError> {
    if let Some(f) = fields {
        for e in 0..f.n_elements() {
            for q in f.element(e) {
                if !(q.det > 0.0) {
                    return Err(FemError::NonPositiveJacobian {
                        element: f.elements()[e],
                        det: q.det,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Transformed Oseen operator:
///
/// ```text
/// ν∫Dψ:(Dw A) + ∫ψ·(Dw Kᵀ â) + ∫ψ·(Dr Kᵀ w) − ∫p K:Dψ + ∫q K:Dw
/// ```
///
/// with advector `â` and reaction field `r` optional. `fields = None` means
/// identity transform.
pub fn oseen_matrix(
    mesh: &Mesh,
    spaces: &FluidSpaces,
    fields: Option<&TransformFields>,
    advector: Option<&[f64]>,
    reaction: Option<&[f64]>,
    nu: f64,
) -> Result<CsrMatrix, FemError> {
    check_positive(fields)?;
    let n = spaces.dim();
    let vel = &spaces.velocity;
    let elements = vel.elements();
    Ok(assemble_matrix(n, n, elements.len(), |e| {
        let t = elements[e];
        let el = Element::new(mesh, t);
        let dofs = spaces.element_dofs(mesh, t);
        let adv = advector.map(|a| local_vector(vel, mesh, a, t));
        let rea = reaction.map(|r| local_vector(vel, mesh, r, t));
        let mut m = LocalMatrix::zeros(dofs.clone(), dofs);
        for q in 0..NQ {
            let w = el.weight(q);
            let g = el.p2_grads_at(q);
            let phi = el.p2_at(q);
            let chi = el.p1_at(q);
            let tf = transform_at(fields, e, q);
            let (a, k) = (tf.diffusion, tf.cofactor);
            let at = a.transpose();
            let ag: [[f64; 2]; 6] = g.map(|gj| at.mul_vec(gj));
            let kg: [[f64; 2]; 6] = g.map(|gj| k.mul_vec(gj));
            for i in 0..6 {
                for j in 0..6 {
                    let s = nu * w * (g[i][0] * ag[j][0] + g[i][1] * ag[j][1]);
                    m.add(2 * i, 2 * j, s);
                    m.add(2 * i + 1, 2 * j + 1, s);
                }
            }
            if let Some(adv) = &adv {
                let kv = k.transpose().mul_vec(vector_value(adv, phi));
                for i in 0..6 {
                    for j in 0..6 {
                        let s = w * phi[i] * (g[j][0] * kv[0] + g[j][1] * kv[1]);
                        m.add(2 * i, 2 * j, s);
                        m.add(2 * i + 1, 2 * j + 1, s);
                    }
                }
            }
            if let Some(rea) = &rea {
                let r = vector_gradient(rea, &g) * k.transpose();
                for i in 0..6 {
                    for j in 0..6 {
                        let s = w * phi[i] * phi[j];
                        for c in 0..2 {
                            for d in 0..2 {
                                m.add(2 * i + c, 2 * j + d, s * r.0[c][d]);
                            }
                        }
                    }
                }
            }
            for i in 0..6 {
                for (kk, &c) in chi.iter().enumerate() {
                    for d in 0..2 {
                        m.add(2 * i + d, 12 + kk, -w * c * kg[i][d]);
                        m.add(12 + kk, 2 * i + d, w * c * kg[i][d]);
                    }
                }
            }
        }
        m
    }))
}

/// [`oseen_matrix`] packaged as a saddle system with zero load.
pub fn assemble_transformed_oseen(
    mesh: &Mesh,
    spaces: &FluidSpaces,
    fields: Option<&TransformFields>,
    advector: Option<&[f64]>,
    reaction: Option<&[f64]>,
    nu: f64,
) -> Result<SaddleSystem, FemError> {
    let matrix = oseen_matrix(mesh, spaces, fields, advector, reaction, nu)?;
    Ok(SaddleSystem {
        rhs: vec![0.0; matrix.nrows()],
        matrix,
        n_velocity: spaces.n_velocity(),
        n_pressure: spaces.n_pressure(),
    })
}

/// Transformed convection `∫ψ·(Dw Kᵀ v)` as a vector over velocity dofs.
pub fn convection_vector(
    mesh: &Mesh,
    spaces: &FluidSpaces,
    fields: Option<&TransformFields>,
    v: &[f64],
    w: &[f64],
) -> Vec<f64> {
    let vel = &spaces.velocity;
    let elements = vel.elements();
    assemble_vector(spaces.n_velocity(), elements.len(), |e| {
        let t = elements[e];
        let el = Element::new(mesh, t);
        let lv = local_vector(vel, mesh, v, t);
        let lw = local_vector(vel, mesh, w, t);
        let mut out = vec![0.0; 12];
        for q in 0..NQ {
            let wq = el.weight(q);
            let g = el.p2_grads_at(q);
            let phi = el.p2_at(q);
            let k = transform_at(fields, e, q).cofactor;
            let c = (vector_gradient(&lw, &g) * k.transpose()).mul_vec(vector_value(&lv, phi));
            for i in 0..6 {
                out[2 * i] += wq * phi[i] * c[0];
                out[2 * i + 1] += wq * phi[i] * c[1];
            }
        }
        (vel.vector_element_dofs(mesh, t).to_vec(), out)
    })
}

/// Componentwise vector Laplacian `∫∇φ:∇ψ` on a vector P2 space.
pub fn vector_laplace_matrix(mesh: &Mesh, space: &FeSpace) -> CsrMatrix {
    let n = space.n_dofs();
    let elements = space.elements();
    assemble_matrix(n, n, elements.len(), |e| {
        let t = elements[e];
        let el = Element::new(mesh, t);
        let dofs = space.vector_element_dofs(mesh, t).to_vec();
        let mut m = LocalMatrix::zeros(dofs.clone(), dofs);
        for q in 0..NQ {
            let w = el.weight(q);
            let g = el.p2_grads_at(q);
            for i in 0..6 {
                for j in 0..6 {
                    let s = w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                    m.add(2 * i, 2 * j, s);
                    m.add(2 * i + 1, 2 * j + 1, s);
                }
            }
        }
        m
    })
}

/// `∫v·ψ` on a vector P2 space.
pub fn vector_mass_matrix(mesh: &Mesh, space: &FeSpace) -> CsrMatrix {
    let n = space.n_dofs();
    let elements = space.elements();
    assemble_matrix(n, n, elements.len(), |e| {
        let t = elements[e];
        let el = Element::new(mesh, t);
        let dofs = space.vector_element_dofs(mesh, t).to_vec();
        let mut m = LocalMatrix::zeros(dofs.clone(), dofs);
        for q in 0..NQ {
            let w = el.weight(q);
            let phi = el.p2_at(q);
            for i in 0..6 {
                for j in 0..6 {
                    let s = w * phi[i] * phi[j];
                    m.add(2 * i, 2 * j, s);
                    m.add(2 * i + 1, 2 * j + 1, s);
                }
            }
        }
        m
    })
}

/// `∫p q` on a scalar P1 space.
pub fn scalar_mass_matrix(mesh: &Mesh, space: &FeSpace) -> CsrMatrix {
    let n = space.n_dofs();
    let elements = space.elements();
    assemble_matrix(n, n, elements.len(), |e| {
        let t = elements[e];
        let el = Element::new(mesh, t);
        let dofs = space.p1_element_nodes(mesh, t).to_vec();
        let mut m = LocalMatrix::zeros(dofs.clone(), dofs);
        for q in 0..NQ {
            let w = el.weight(q);
            let chi = el.p1_at(q);
            for i in 0..3 {
                for j in 0..3 {
                    m.add(i, j, w * chi[i] * chi[j]);
                }
            }
        }
        m
    })
}

/// `∫∇p·∇q` on a scalar P1 space.
pub fn scalar_p1_laplace_matrix(mesh: &Mesh, space: &FeSpace) -> CsrMatrix {
    let n = space.n_dofs();
    let elements = space.elements();
    assemble_matrix(n, n, elements.len(), |e| {
        let t = elements[e];
        let el = Element::new(mesh, t);
        let dofs = space.p1_element_nodes(mesh, t).to_vec();
        let g = el.p1_grads();
        let mut m = LocalMatrix::zeros(dofs.clone(), dofs);
        for i in 0..3 {
            for j in 0..3 {
                m.add(i, j, el.area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]));
            }
        }
        m
    })
}

/// Isotropic linear elasticity `∫2μ ε(u):ε(ψ) + λ div u div ψ`.
pub fn elasticity_matrix(mesh: &Mesh, space: &FeSpace, lambda: f64, mu: f64) -> CsrMatrix {
    let n = space.n_dofs();
    let elements = space.elements();
    assemble_matrix(n, n, elements.len(), |e| {
        let t = elements[e];
        let el = Element::new(mesh, t);
        let dofs = space.vector_element_dofs(mesh, t).to_vec();
        let mut m = LocalMatrix::zeros(dofs.clone(), dofs);
        for q in 0..NQ {
            let w = el.weight(q);
            let g = el.p2_grads_at(q);
            for i in 0..6 {
                for j in 0..6 {
                    let dot = g[i][0] * g[j][0] + g[i][1] * g[j][1];
                    for c in 0..2 {
                        for d in 0..2 {
                            let mut s = mu * g[i][d] * g[j][c] + lambda * g[i][c] * g[j][d];
                            if c == d {
                                s += mu * dot;
                            }
                            m.add(2 * i + c, 2 * j + d, w * s);
                        }
                    }
                }
            }
        }
        m
    })
}

/// `∫f·ψ` over the elements of a vector P2 space.
pub fn vector_load(mesh: &Mesh, space: &FeSpace, f: &(dyn Fn([f64; 2]) -> [f64; 2] + Sync)) -> Vec<f64> {
    let elements = space.elements();
    assemble_vector(space.n_dofs(), elements.len(), |e| {
        let t = elements[e];
        let el = Element::new(mesh, t);
        let mut out = vec![0.0; 12];
        for (q, (x, w)) in el.quadrature().into_iter().enumerate() {
            let fx = f(x);
            let phi = el.p2_at(q);
            for i in 0..6 {
                out[2 * i] += w * phi[i] * fx[0];
                out[2 * i + 1] += w * phi[i] * fx[1];
            }
        }
        (space.vector_element_dofs(mesh, t).to_vec(), out)
    })
}

/// `∫f q` over the elements of a scalar P1 space.
pub fn scalar_load(mesh: &Mesh, space: &FeSpace, f: &(dyn Fn([f64; 2]) -> f64 + Sync)) -> Vec<f64> {
    let elements = space.elements();
    assemble_vector(space.n_dofs(), elements.len(), |e| {
        let t = elements[e];
        let el = Element::new(mesh, t);
        let mut out = vec![0.0; 3];
        for (q, (x, w)) in el.quadrature().into_iter().enumerate() {
            let fx = f(x);
            let chi = el.p1_at(q);
            for i in 0..3 {
                out[i] += w * chi[i] * fx;
            }
        }
        (space.p1_element_nodes(mesh, t).to_vec(), out)
    })
}

/// `∫_Γ f·ψ ds` over edges of `tag`, where `f` receives the point and the
/// unit normal pointing out of the edge's adjacent triangle.
pub fn boundary_load(
    mesh: &Mesh,
    space: &FeSpace,
    tag: BoundaryTag,
    f: &dyn Fn([f64; 2], [f64; 2]) -> [f64; 2],
) -> Vec<f64> {
    let mut out = vec![0.0; space.n_dofs()];
    for be in mesh.edges_with_tag(tag) {
        let nodes = mesh.edge_p2_nodes(be).map(|n| space.node_of_mesh_node(n));
        let (pa, pb) = (mesh.nodes()[be.nodes[0]], mesh.nodes()[be.nodes[1]]);
        for &(s, w) in edge_rule() {
            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let fx = f(x, be.normal);
            let phi = edge_p2_values(s);
            for (k, n) in nodes.iter().enumerate() {
                if let Some(n) = n {
                    out[2 * n] += w * be.length * phi[k] * fx[0];
                    out[2 * n + 1] += w * be.length * phi[k] * fx[1];
                }
            }
        }
    }
    out
}

/// Volume, divergence and outflow data of the fluid momentum and
/// continuity equations as one saddle-system load vector:
/// `∫f·ψ + ∫_out f₃·ψ` on velocity rows and `∫f₂ q` on pressure rows.
pub fn assemble_rhs(
    mesh: &Mesh,
    spaces: &FluidSpaces,
    f: Option<&(dyn Fn([f64; 2]) -> [f64; 2] + Sync)>,
    f2: Option<&(dyn Fn([f64; 2]) -> f64 + Sync)>,
    f3: Option<&dyn Fn([f64; 2], [f64; 2]) -> [f64; 2]>,
) -> Vec<f64> {
    let mut out = vec![0.0; spaces.dim()];
    let nu = spaces.n_velocity();
    if let Some(f) = f {
        out[..nu].copy_from_slice(&vector_load(mesh, &spaces.velocity, f));
    }
    if let Some(f3) = f3 {
        let b = boundary_load(mesh, &spaces.velocity, BoundaryTag::Outflow, f3);
        for (o, v) in out[..nu].iter_mut().zip(b) {
            *o += v;
        }
    }
    if let Some(f2) = f2 {
        out[nu..].copy_from_slice(&scalar_load(mesh, &spaces.pressure, f2));
    }
    out
}

/// Lumped area weights `∫φ_i` of the vector P2 velocity basis (per dof).
pub fn basis_integrals(mesh: &Mesh, space: &FeSpace) -> Vec<f64> {
    vector_load(mesh, space, &|_| [1.0, 1.0])
}

/// Evaluates a vector P2 field and its gradient at a reference point of
/// element `t`.
pub fn eval_vector(mesh: &Mesh, space: &FeSpace, coeffs: &[f64], t: usize, x: [f64; 2]) -> ([f64; 2], Mat2) {
    let el = Element::new(mesh, t);
    let loc = local_vector(space, mesh, coeffs, t);
    let phi = super::element::p2_values(x);
    (vector_value(&loc, &phi), vector_gradient(&loc, &el.p2_grads_ref_point(x)))
}

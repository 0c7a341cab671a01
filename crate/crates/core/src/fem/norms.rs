use rayon::prelude::*;

use super::assembly::{scalar_mass_matrix, vector_laplace_matrix, vector_mass_matrix};
use super::element::{vector_gradient, vector_value, Element};
use super::space::{local_scalar, local_vector, FeSpace};
use crate::linalg::{CsrMatrix, Mat2};
use crate::mesh::Mesh;

/// Gram matrix of a discrete norm.
#[derive(Clone, Debug)]
pub struct NormMatrix(CsrMatrix);

impl NormMatrix {
    /// `‖v‖²_{H¹} = ∫|v|² + ∫|Dv|²` on a vector P2 space.
    pub fn h1_vector(mesh: &Mesh, space: &FeSpace) -> Self {
        let m = vector_mass_matrix(mesh, space);
        let k = vector_laplace_matrix(mesh, space);
        let mut b = crate::linalg::TripletBuilder::new(m.nrows(), m.ncols());
        for (i, j, v) in m.triplets().chain(k.triplets()) {
            b.push(i, j, v);
        }
        Self(b.build())
    }

    /// `‖p‖²_{L²}` on a scalar P1 space.
    pub fn l2_scalar(mesh: &Mesh, space: &FeSpace) -> Self {
        Self(scalar_mass_matrix(mesh, space))
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        self.0.quad_form(v).max(0.0).sqrt()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        crate::linalg::csr::dot(a, &self.0.mul_vec(b))
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.0
    }
}

/// `(‖v − v*‖_{H¹}, ‖v − v*‖_{L²})` against an exact field given with its
/// gradient, by element quadrature.
pub fn vector_errors(
    mesh: &Mesh,
    space: &FeSpace,
    coeffs: &[f64],
    exact: &(dyn Fn([f64; 2]) -> ([f64; 2], Mat2) + Sync),
) -> (f64, f64) {
    let (l2, semi): (f64, f64) = space
        .elements()
        .par_iter()
        .map(|&t| {
            let el = Element::new(mesh, t);
            let loc = local_vector(space, mesh, coeffs, t);
            let (mut a, mut b) = (0.0, 0.0);
            for (q, (x, w)) in el.quadrature().into_iter().enumerate() {
                let (ve, ge) = exact(x);
                let v = vector_value(&loc, el.p2_at(q));
                let g = vector_gradient(&loc, &el.p2_grads_at(q));
                a += w * ((v[0] - ve[0]).powi(2) + (v[1] - ve[1]).powi(2));
                let d = g - ge;
                b += w * d.ddot(&d);
            }
            (a, b)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    ((l2 + semi).sqrt(), l2.sqrt())
}

/// `‖p − p*‖_{L²}` on a scalar P1 space.
pub fn scalar_l2_error(mesh: &Mesh, space: &FeSpace, coeffs: &[f64], exact: &(dyn Fn([f64; 2]) -> f64 + Sync)) -> f64 {
    space
        .elements()
        .par_iter()
        .map(|&t| {
            let el = Element::new(mesh, t);
            let loc = local_scalar(space, mesh, coeffs, t);
            let mut s = 0.0;
            for (q, (x, w)) in el.quadrature().into_iter().enumerate() {
                let chi = el.p1_at(q);
                let p = loc[0] * chi[0] + loc[1] * chi[1] + loc[2] * chi[2];
                s += w * (p - exact(x)).powi(2);
            }
            s
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum::<f64>()
        .sqrt()
}

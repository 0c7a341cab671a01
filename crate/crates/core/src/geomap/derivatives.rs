use rayon::prelude::*;

use crate::fem::element::{vector_gradient, Element};
use crate::fem::quadrature::NQ;
use crate::fem::space::{local_vector, FeSpace};
use crate::linalg::Mat2;
use crate::mesh::Mesh;

use super::fields::{QpTransform, TransformFields};

/// Directional derivatives of the pullback data at one quadrature point,
/// in the direction of an extension increment with gradient `Dδφ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpDerivative {
    pub jacobian: Mat2,
    pub det: f64,
    pub cofactor: Mat2,
    pub diffusion: Mat2,
}

impl QpDerivative {
    pub const ZERO: Self = Self {
        jacobian: Mat2::ZERO,
        det: 0.0,
        cofactor: Mat2::ZERO,
        diffusion: Mat2::ZERO,
    };
}

impl QpTransform {
    /// Jacobi's formula for the determinant, linearity of the 2×2 cofactor,
    /// and the product rule for `J⁻¹ KᵀK`.
    pub fn derivative(&self, grad: Mat2) -> QpDerivative {
        let inv = self.cofactor.transpose().scale(1.0 / self.det);
        let det = self.det * (inv * grad).trace();
        let cofactor = grad.cofactor();
        let k = self.cofactor;
        let ktk = k.transpose() * k;
        let diffusion = ktk.scale(-det / (self.det * self.det))
            + (cofactor.transpose() * k + k.transpose() * cofactor).scale(1.0 / self.det);
        QpDerivative {
            jacobian: grad,
            det,
            cofactor,
            diffusion,
        }
    }
}

/// [`QpDerivative`] at every quadrature point of the fluid elements.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformDerivatives {
    values: Vec<[QpDerivative; NQ]>,
}

impl TransformDerivatives {
    pub fn at(&self, e: usize, q: usize) -> &QpDerivative {
        &self.values[e][q]
    }

    pub fn n_elements(&self) -> usize {
        self.values.len()
    }
}

/// Derivatives of `fields` in the direction of the extension increment
/// `dphi` (vector P2 coefficients on `space`).
pub fn transform_derivatives(mesh: &Mesh, space: &FeSpace, fields: &TransformFields, dphi: &[f64]) -> TransformDerivatives {
    let values = space
        .elements()
        .par_iter()
        .enumerate()
        .map(|(e, &t)| {
            let el = Element::new(mesh, t);
            let loc = local_vector(space, mesh, dphi, t);
            let mut out = [QpDerivative::ZERO; NQ];
            for (q, o) in out.iter_mut().enumerate() {
                let g = vector_gradient(&loc, &el.p2_grads_at(q));
                *o = fields.at(e, q).derivative(g);
            }
            out
        })
        .collect();
    TransformDerivatives { values }
}

/// Largest row-wise divergence `|∂_j K_ij|` of the cofactor field of
/// `id + φ`, evaluated from the constant element Hessians of `φ`.
pub fn max_cofactor_divergence(mesh: &Mesh, space: &FeSpace, phi: &[f64]) -> f64 {
    space
        .elements()
        .par_iter()
        .map(|&t| {
            let el = Element::new(mesh, t);
            let loc = local_vector(space, mesh, phi, t);
            let hess = el.p2_hessians();
            // dm[k] = ∂_k (Dφ), with (Dφ)_ab = ∂_b φ_a
            let mut dm = [Mat2::ZERO; 2];
            for (v, h) in loc.iter().zip(&hess) {
                for (k, m) in dm.iter_mut().enumerate() {
                    *m = *m + Mat2::outer(*v, [h.0[0][k], h.0[1][k]]);
                }
            }
            // cofactor is linear, and cof(I) is constant
            let c0 = dm[0].cofactor();
            let c1 = dm[1].cofactor();
            let div = [c0.0[0][0] + c1.0[0][1], c0.0[1][0] + c1.0[1][1]];
            div[0].abs().max(div[1].abs())
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_base_reduces_to_trace_form() {
        let g = Mat2::new(0.3, -0.1, 0.7, 0.2);
        let d = QpTransform::IDENTITY.derivative(g);
        assert!((d.det - g.trace()).abs() < 1e-15);
        let expected = Mat2::IDENTITY.scale(-g.trace()) + g.cofactor() + g.cofactor().transpose();
        assert!((d.diffusion - expected).max_abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let base = QpTransform::from_jacobian(Mat2::new(1.1, 0.05, -0.08, 0.93));
        let g = Mat2::new(0.2, -0.4, 0.1, 0.3);
        let d = base.derivative(g);
        let h = 1e-6;
        let p = QpTransform::from_jacobian(base.jacobian + g.scale(h));
        let m = QpTransform::from_jacobian(base.jacobian - g.scale(h));
        let fd = (p.diffusion - m.diffusion).scale(0.5 / h);
        assert!((fd - d.diffusion).max_abs() < 1e-8);
        assert!(((p.det - m.det) / (2.0 * h) - d.det).abs() < 1e-8);
    }
}

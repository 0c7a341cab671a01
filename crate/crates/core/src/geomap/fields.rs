use rayon::prelude::*;
use serde::Serialize;

use crate::error::GeomapError;
use crate::fem::element::{vector_gradient, Element};
use crate::fem::quadrature::NQ;
use crate::fem::space::{local_vector, FeSpace};
use crate::linalg::Mat2;
use crate::mesh::Mesh;

/// Smallest admissible eigenvalue of the diffusion field.
pub const ELLIPTICITY_FLOOR: f64 = 0.25;

/// Pullback data at one quadrature point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpTransform {
    /// Jacobian of the flow map, rows are components
    pub jacobian: Mat2,
    pub det: f64,
    /// `cof(jacobian) = det · jacobian⁻ᵀ`
    pub cofactor: Mat2,
    /// `det⁻¹ · cofactorᵀ · cofactor`
    pub diffusion: Mat2,
}

impl QpTransform {
    pub const IDENTITY: Self = Self {
        jacobian: Mat2::IDENTITY,
        det: 1.0,
        cofactor: Mat2::IDENTITY,
        diffusion: Mat2::IDENTITY,
    };

    pub fn from_jacobian(jacobian: Mat2) -> Self {
        let det = jacobian.det();
        let cofactor = jacobian.cofactor();
        let diffusion = (cofactor.transpose() * cofactor).scale(1.0 / det);
        Self {
            jacobian,
            det,
            cofactor,
            diffusion,
        }
    }
}

/// Per-element, per-quadrature-point transform data on the fluid elements,
/// indexed by position in the fluid space's element list.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformFields {
    values: Vec<[QpTransform; NQ]>,
    /// mesh triangle ids, same order as `values`
    elements: Vec<usize>,
}

/// Per-element quality summary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ElementQuality {
    pub element: usize,
    pub min_det: f64,
    pub min_diffusion_eig: f64,
}

impl TransformFields {
    pub fn identity(space: &FeSpace) -> Self {
        Self {
            values: vec![[QpTransform::IDENTITY; NQ]; space.elements().len()],
            elements: space.elements().to_vec(),
        }
    }

    /// Fields of `Φ = id + φ` with `φ` a vector P2 field on `space`.
    /// No admissibility checks; see [`TransformFields::check_admissible`].
    pub fn from_displacement_field(mesh: &Mesh, space: &FeSpace, phi: &[f64]) -> Self {
        let values = space
            .elements()
            .par_iter()
            .map(|&t| {
                let el = Element::new(mesh, t);
                let loc = local_vector(space, mesh, phi, t);
                let mut out = [QpTransform::IDENTITY; NQ];
                for (q, o) in out.iter_mut().enumerate() {
                    let d = vector_gradient(&loc, &el.p2_grads_at(q));
                    *o = QpTransform::from_jacobian(Mat2::IDENTITY + d);
                }
                out
            })
            .collect();
        Self {
            values,
            elements: space.elements().to_vec(),
        }
    }

    pub fn n_elements(&self) -> usize {
        self.values.len()
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn at(&self, e: usize, q: usize) -> &QpTransform {
        &self.values[e][q]
    }

    pub fn element(&self, e: usize) -> &[QpTransform; NQ] {
        &self.values[e]
    }

    pub fn quality(&self) -> Vec<ElementQuality> {
        self.values
            .iter()
            .zip(&self.elements)
            .map(|(v, &t)| ElementQuality {
                element: t,
                min_det: v.iter().map(|x| x.det).fold(f64::INFINITY, f64::min),
                min_diffusion_eig: v
                    .iter()
                    .map(|x| x.diffusion.sym_eigenvalues()[0])
                    .fold(f64::INFINITY, f64::min),
            })
            .collect()
    }

    pub fn min_det(&self) -> f64 {
        self.quality().iter().map(|q| q.min_det).fold(f64::INFINITY, f64::min)
    }

    pub fn min_diffusion_eig(&self) -> f64 {
        self.quality()
            .iter()
            .map(|q| q.min_diffusion_eig)
            .fold(f64::INFINITY, f64::min)
    }

    /// `max |A - I|` and `max |K - I|` over all quadrature points.
    pub fn deviation_from_identity(&self) -> (f64, f64) {
        self.values.iter().flatten().fold((0.0, 0.0), |(a, k), x| {
            (
                f64::max(a, (x.diffusion - Mat2::IDENTITY).max_abs()),
                f64::max(k, (x.cofactor - Mat2::IDENTITY).max_abs()),
            )
        })
    }

    /// Rejects tangled maps (`det ≤ 0`) and loss of ellipticity
    /// (smallest eigenvalue of the diffusion field below `beta`).
    pub fn check_admissible(&self, beta: f64) -> Result<(), GeomapError> {
        for q in self.quality() {
            if !(q.min_det > 0.0) {
                return Err(GeomapError::Tangled {
                    element: q.element,
                    det: q.min_det,
                });
            }
        }
        for q in self.quality() {
            if !(q.min_diffusion_eig >= beta) {
                return Err(GeomapError::NotElliptic {
                    element: q.element,
                    min_eig: q.min_diffusion_eig,
                    beta,
                });
            }
        }
        Ok(())
    }

    /// CSV with columns `element,min_det,min_eig_a`.
    pub fn quality_csv(&self) -> String {
        let mut s = String::from("element,min_det,min_eig_a\n");
        for q in self.quality() {
            s.push_str(&format!("{},{:.17e},{:.17e}\n", q.element, q.min_det, q.min_diffusion_eig));
        }
        s
    }
}

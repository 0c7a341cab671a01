use serde::{Deserialize, Serialize};

use crate::error::FluidError;
use crate::fem::assembly::{assemble_matrix, assemble_vector, oseen_matrix, transform_at, LocalMatrix};
use crate::fem::element::{vector_gradient, vector_value, Element};
use crate::fem::quadrature::NQ;
use crate::fem::space::{local_scalar, local_vector};
use crate::fem::system::{Constraints, FactoredSystem};
use crate::geomap::TransformFields;
use crate::linalg::csr::sub;
use crate::linalg::{CsrMatrix, Mat2};
use crate::report::SolverReport;

use super::{difference, FluidProblem, FluidState};

/// How the linearized system is solved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
#[derive(Default)]
pub enum LinearizedMode {
    /// one factorization of the full transformed Oseen operator
    #[default]
    Direct,
    /// fixed point with the identity-coefficient Oseen operator on the
    /// left and the transform perturbations lagged on the right
    TIteration { tol: f64, max_iter: usize },
}


enum Strategy {
    Direct(FactoredSystem),
    Iterative {
        identity: FactoredSystem,
        /// full operator minus identity-coefficient operator
        perturbation: CsrMatrix,
        tol: f64,
        max_iter: usize,
    },
}

/// Navier–Stokes operator linearized at a base state `(ŵ, p̂)`:
/// `ν∫Dψ:(Dz A) + ∫ψ·(Dz Kᵀŵ) + ∫ψ·(Dŵ Kᵀz) − ∫z_p K:Dψ` with the
/// transformed continuity row `∫q K:Dz`.
pub struct LinearizedOperator {
    matrix: CsrMatrix,
    strategy: Strategy,
}

impl LinearizedOperator {
    pub fn new(
        problem: &FluidProblem,
        fields: Option<&TransformFields>,
        base: &FluidState,
        mode: LinearizedMode,
    ) -> Result<Self, FluidError> {
        let (mesh, spaces, nu) = (problem.mesh(), problem.spaces(), problem.viscosity());
        let w = problem.has_convection().then_some(base.velocity.as_slice());
        let matrix = oseen_matrix(mesh, spaces, fields, w, w, nu)?;
        let dirichlet = problem.dirichlet_dofs();
        let strategy = match mode {
            LinearizedMode::Direct => Strategy::Direct(FactoredSystem::new(&matrix, dirichlet)?),
            LinearizedMode::TIteration { tol, max_iter } => {
                let t = oseen_matrix(mesh, spaces, None, w, w, nu)?;
                Strategy::Iterative {
                    identity: FactoredSystem::new(&t, dirichlet)?,
                    perturbation: difference(&matrix, &t),
                    tol,
                    max_iter,
                }
            }
        };
        Ok(Self { matrix, strategy })
    }

    /// Unconstrained linearized operator.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Solves `L z = rhs` with velocity values prescribed by `constraints`
    /// (Dirichlet dofs without a prescription are zero). The report measures
    /// increments in the H¹×L² norm for the iterative strategy.
    pub fn solve(
        &self,
        problem: &FluidProblem,
        rhs: &[f64],
        constraints: &Constraints,
    ) -> Result<(Vec<f64>, SolverReport), FluidError> {
        match &self.strategy {
            Strategy::Direct(f) => {
                let z = f.solve(rhs, constraints)?;
                let mut report = SolverReport::default();
                report.push(0.0);
                report.converged = true;
                Ok((z, report))
            }
            Strategy::Iterative {
                identity,
                perturbation,
                tol,
                max_iter,
            } => {
                let mut z = vec![0.0; rhs.len()];
                let mut report = SolverReport::default();
                for _ in 0..*max_iter {
                    let mut b = rhs.to_vec();
                    perturbation.mul_vec_add(-1.0, &z, &mut b);
                    let next = identity.solve(&b, constraints)?;
                    let diff = problem.product_norm(&sub(&next, &z));
                    let size = problem.product_norm(&next);
                    let incr = if diff == 0.0 { 0.0 } else { diff / size.max(f64::MIN_POSITIVE) };
                    z = next;
                    report.push(incr);
                    if !incr.is_finite() {
                        break;
                    }
                    if incr <= *tol {
                        report.converged = true;
                        break;
                    }
                }
                if !report.converged {
                    return Err(FluidError::Diverged { report });
                }
                Ok((z, report))
            }
        }
    }
}

/// Local contribution of the displacement-direction derivative of the
/// transformed residual, for an extension increment with element values
/// `dphi`: 12 momentum entries then 3 continuity entries.
#[allow(clippy::too_many_arguments)]
fn shape_kernel(
    el: &Element,
    e: usize,
    fields: Option<&TransformFields>,
    nu: f64,
    convection: bool,
    w: &[[f64; 2]; 6],
    p: &[f64; 3],
    dphi: &[[f64; 2]; 6],
) -> [f64; 15] {
    let mut out = [0.0; 15];
    for q in 0..NQ {
        let wq = el.weight(q);
        let g = el.p2_grads_at(q);
        let phi = el.p2_at(q);
        let chi = el.p1_at(q);
        let d = transform_at(fields, e, q).derivative(vector_gradient(dphi, &g));
        let dw = vector_gradient(w, &g);
        let pq = p[0] * chi[0] + p[1] * chi[1] + p[2] * chi[2];
        let flux: Mat2 = (dw * d.diffusion).scale(nu);
        let conv = if convection {
            (dw * d.cofactor.transpose()).mul_vec(vector_value(w, phi))
        } else {
            [0.0, 0.0]
        };
        for i in 0..6 {
            let fg = flux.mul_vec(g[i]);
            let kg = d.cofactor.mul_vec(g[i]);
            for c in 0..2 {
                out[2 * i + c] += wq * (fg[c] + phi[i] * conv[c] - pq * kg[c]);
            }
        }
        let div = d.cofactor.ddot(&dw);
        for m in 0..3 {
            out[12 + m] += wq * chi[m] * div;
        }
    }
    out
}

impl FluidProblem {
    /// Linearized operator at `base`.
    pub fn linearize(
        &self,
        fields: Option<&TransformFields>,
        base: &FluidState,
        mode: LinearizedMode,
    ) -> Result<LinearizedOperator, FluidError> {
        LinearizedOperator::new(self, fields, base, mode)
    }

    /// One-shot linearized solve: `L z = rhs` with `constraints` on the
    /// velocity Dirichlet dofs.
    pub fn solve_linearized(
        &self,
        fields: Option<&TransformFields>,
        base: &FluidState,
        rhs: &[f64],
        constraints: &Constraints,
        mode: LinearizedMode,
    ) -> Result<(FluidState, SolverReport), FluidError> {
        let op = self.linearize(fields, base, mode)?;
        let (z, report) = op.solve(self, rhs, constraints)?;
        Ok((FluidState::from_flat(self.spaces(), &z), report))
    }

    /// Derivative of the transformed weak residual at `base` in the direction
    /// of an extension increment `dphi` (vector P2 coefficients in the
    /// velocity layout). Dirichlet rows are zero.
    pub fn shape_derivative(&self, fields: Option<&TransformFields>, base: &FluidState, dphi: &[f64]) -> Vec<f64> {
        let (mesh, spaces, nu) = (self.mesh().as_ref(), self.spaces(), self.viscosity());
        let vel = &spaces.velocity;
        assert_eq!(dphi.len(), vel.n_dofs(), "increment must use the velocity layout");
        let elements = vel.elements();
        let mut r = assemble_vector(spaces.dim(), elements.len(), |e| {
            let t = elements[e];
            let el = Element::new(mesh, t);
            let w = local_vector(vel, mesh, &base.velocity, t);
            let p = local_scalar(&spaces.pressure, mesh, &base.pressure, t);
            let d = local_vector(vel, mesh, dphi, t);
            (spaces.element_dofs(mesh, t), shape_kernel(&el, e, fields, nu, self.has_convection(), &w, &p, &d).to_vec())
        });
        for &d in self.dirichlet_dofs() {
            r[d] = 0.0;
        }
        r
    }

    /// Matrix of [`FluidProblem::shape_derivative`]: saddle rows by
    /// extension columns, Dirichlet rows kept (callers eliminate them).
    pub fn shape_derivative_matrix(&self, fields: Option<&TransformFields>, base: &FluidState) -> CsrMatrix {
        let (mesh, spaces, nu) = (self.mesh().as_ref(), self.spaces(), self.viscosity());
        let vel = &spaces.velocity;
        let elements = vel.elements();
        assemble_matrix(spaces.dim(), vel.n_dofs(), elements.len(), |e| {
            let t = elements[e];
            let el = Element::new(mesh, t);
            let w = local_vector(vel, mesh, &base.velocity, t);
            let p = local_scalar(&spaces.pressure, mesh, &base.pressure, t);
            let mut m = LocalMatrix::zeros(spaces.element_dofs(mesh, t), vel.vector_element_dofs(mesh, t).to_vec());
            for col in 0..12 {
                let mut d = [[0.0; 2]; 6];
                d[col / 2][col % 2] = 1.0;
                let k = shape_kernel(&el, e, fields, nu, self.has_convection(), &w, &p, &d);
                for (row, v) in k.iter().enumerate() {
                    m.add(row, col, *v);
                }
            }
            m
        })
    }
}

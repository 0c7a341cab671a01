//! Partitioned fixed point of the coupled problem: fluid solve on the
//! current pullback fields, interface traction, elasticity solve, update
//! of the interface displacement.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::elasticity::{ElasticitySolver, LameParameters, TractionTrace};
use crate::error::{FsiError, GeomapError};
use crate::fem::element::{p1_values, vector_gradient, Element};
use crate::fem::norms::NormMatrix;
use crate::fem::space::{local_scalar, local_vector};
use crate::fluid::{FluidData, FluidOptions, FluidProblem, FluidState, InflowData};
use crate::geomap::{HarmonicExtension, InterfaceTrace, TransformFields, ELLIPTICITY_FLOOR};
use crate::linalg::csr::{norm2, sub};
use crate::linalg::Mat2;
use crate::mesh::{BoundaryTag, Mesh};
use crate::report::SolverReport;

/// How the fluid traction loads the solid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TractionInterpretation {
    /// the full vector `p K n`
    #[default]
    FullVector,
    /// only its normal part `((p K n)·n) n`
    NormalProjected,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingOptions {
    /// relaxation `ω ∈ (0, 1]`; 1 is the plain fixed point
    pub relaxation: f64,
    /// relative H¹ increment of the displacement
    pub tol: f64,
    pub max_outer_iter: usize,
    pub traction: TractionInterpretation,
    /// start each fluid solve from the previous outer iterate
    pub warm_start: bool,
    /// consecutive increment ratios ≥ 1 that count as divergence
    pub divergence_window: usize,
    pub fluid: FluidOptions,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self {
            relaxation: 1.0,
            tol: 1e-9,
            max_outer_iter: 100,
            traction: TractionInterpretation::FullVector,
            warm_start: true,
            divergence_window: 5,
            fluid: FluidOptions::default(),
        }
    }
}

impl CouplingOptions {
    pub fn validate(&self) -> Result<(), FsiError> {
        let bad = |m: String| Err(FsiError::InvalidOptions(m));
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return bad(format!("relaxation must lie in (0, 1], got {}", self.relaxation));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_outer_iter == 0 || self.divergence_window == 0 {
            return bad("max_outer_iter and divergence_window must be at least 1".into());
        }
        if !(self.fluid.tol > 0.0) || self.fluid.max_iter == 0 {
            return bad("fluid tolerance and iteration limit must be positive".into());
        }
        Ok(())
    }
}

/// One row of the outer-iteration log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OuterRecord {
    pub iteration: usize,
    pub increment: f64,
    pub ratio: Option<f64>,
    pub fluid_iterations: usize,
    pub min_det: f64,
    pub min_diffusion_eig: f64,
}

/// A coupled state: solid displacement, its extension, the pullback
/// fields and the fluid solution on them.
#[derive(Clone, Debug)]
pub struct FsiState {
    /// displacement coefficients on the solid
    pub displacement: Vec<f64>,
    /// extension coefficients on the fluid (velocity layout)
    pub extension: Vec<f64>,
    pub fields: TransformFields,
    pub fluid: FluidState,
    pub report: SolverReport,
    pub log: Vec<OuterRecord>,
}

impl FsiState {
    /// CSV with columns `iter,du,ratio,fluid_iterations,min_det,min_eig_a`.
    pub fn log_csv(&self) -> String {
        let mut s = String::from("iter,du,ratio,fluid_iterations,min_det,min_eig_a\n");
        for r in &self.log {
            let ratio = r.ratio.map(|x| format!("{x:.17e}")).unwrap_or_default();
            writeln!(
                s,
                "{},{:.17e},{},{},{:.17e},{:.17e}",
                r.iteration, r.increment, ratio, r.fluid_iterations, r.min_det, r.min_diffusion_eig
            )
            .unwrap();
        }
        s
    }
}

/// Residual of the coupled system at a state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FsiResidual {
    /// weak fluid residual on the pullback fields of the displacement
    pub fluid: f64,
    /// `‖E u − b(t)‖` over free solid rows
    pub elasticity: f64,
    /// `‖u − N t(u, p)‖_{H¹}`
    pub fixed_point: f64,
}

impl FsiResidual {
    pub fn total(&self) -> f64 {
        self.fluid + self.elasticity + self.fixed_point
    }
}

/// Reference coordinates of the local P2 nodes.
const LOCAL_NODES: [[f64; 2]; 6] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];

/// Everything that stays fixed during a coupled solve: the fluid problem,
/// the factored elasticity and extension operators.
pub struct FsiProblem {
    mesh: Arc<Mesh>,
    fluid: FluidProblem,
    elasticity: ElasticitySolver,
    extension: HarmonicExtension,
    solid_norm: NormMatrix,
    geometric_coupling: bool,
}

impl FsiProblem {
    pub fn new(mesh: Arc<Mesh>, nu: f64, lame: LameParameters) -> Result<Self, FsiError> {
        lame.validate().map_err(FsiError::InvalidOptions)?;
        let fluid = FluidProblem::new(Arc::clone(&mesh), nu)?;
        let elasticity = ElasticitySolver::new(&mesh, lame)?;
        let extension = HarmonicExtension::new(&mesh, Arc::clone(&fluid.spaces().velocity))?;
        let solid_norm = NormMatrix::h1_vector(&mesh, elasticity.space());
        Ok(Self {
            mesh,
            fluid,
            elasticity,
            extension,
            solid_norm,
            geometric_coupling: true,
        })
    }

    /// Linear surrogate: no convection and a flow map frozen at the
    /// identity, so the data-to-state map becomes linear.
    pub fn linear_surrogate(mut self) -> Self {
        self.fluid = self.fluid.without_convection();
        self.geometric_coupling = false;
        self
    }

    pub fn has_geometric_coupling(&self) -> bool {
        self.geometric_coupling
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn fluid(&self) -> &FluidProblem {
        &self.fluid
    }

    pub fn elasticity(&self) -> &ElasticitySolver {
        &self.elasticity
    }

    pub fn extension(&self) -> &HarmonicExtension {
        &self.extension
    }

    pub fn solid_norm(&self) -> &NormMatrix {
        &self.solid_norm
    }

    /// Extension coefficients of a solid displacement's interface trace.
    pub fn extend_displacement(&self, u: &[f64]) -> Result<Vec<f64>, FsiError> {
        Ok(self.extend(u)?)
    }

    fn extend(&self, u: &[f64]) -> Result<Vec<f64>, crate::error::FemError> {
        if !self.geometric_coupling {
            return Ok(vec![0.0; self.fluid.spaces().n_velocity()]);
        }
        let trace = InterfaceTrace::from_field(&self.mesh, self.elasticity.space(), u);
        self.extension.extend(&trace)
    }

    /// Extension and admissible pullback fields of a solid displacement.
    pub fn pullback(&self, u: &[f64]) -> Result<(Vec<f64>, TransformFields), GeomapError> {
        let phi = self.extend(u)?;
        let fields = TransformFields::from_displacement_field(&self.mesh, &self.fluid.spaces().velocity, &phi);
        fields.check_admissible(ELLIPTICITY_FLOOR)?;
        Ok((phi, fields))
    }

    /// `t = p K n` at the three nodes of every interface edge, with `K` the
    /// cofactor of `I + Dφ` from the adjacent fluid element and `n` the
    /// fluid-outward reference normal.
    pub fn traction(&self, extension: &[f64], pressure: &[f64], mode: TractionInterpretation) -> TractionTrace {
        self.edge_traction(|grad, p, n| {
            let k = (Mat2::IDENTITY + grad(extension)).cofactor();
            k.mul_vec(n).map(|v| p(pressure) * v)
        }, mode)
    }

    /// Directional derivative of [`FsiProblem::traction`]:
    /// `δp K n + p̂ cof(Dδφ) n`.
    pub fn traction_derivative(
        &self,
        extension: &[f64],
        pressure: &[f64],
        d_extension: &[f64],
        d_pressure: &[f64],
        mode: TractionInterpretation,
    ) -> TractionTrace {
        self.edge_traction(|grad, p, n| {
            let k = (Mat2::IDENTITY + grad(extension)).cofactor();
            let dk = grad(d_extension).cofactor();
            let a = k.mul_vec(n).map(|v| p(d_pressure) * v);
            let b = dk.mul_vec(n).map(|v| p(pressure) * v);
            [a[0] + b[0], a[1] + b[1]]
        }, mode)
    }

    /// Evaluates `f(grad_of, pressure_of, n)` at every interface edge node,
    /// where `grad_of(c)` is the gradient of the vector P2 field `c` and
    /// `pressure_of(c)` the value of the P1 field `c` at that node.
    fn edge_traction<F>(&self, f: F, mode: TractionInterpretation) -> TractionTrace
    where
        F: Fn(&dyn Fn(&[f64]) -> Mat2, &dyn Fn(&[f64]) -> f64, [f64; 2]) -> [f64; 2],
    {
        let mesh = self.mesh.as_ref();
        let spaces = self.fluid.spaces();
        let edges = mesh
            .edges_with_tag(BoundaryTag::Interface)
            .map(|be| {
                let t = be.triangle;
                let el = Element::new(mesh, t);
                let local = mesh.p2_nodes(t);
                mesh.edge_p2_nodes(be).map(|node| {
                    let k = local.iter().position(|&m| m == node).expect("edge node in triangle");
                    let x = LOCAL_NODES[k];
                    let grads = el.p2_grads_ref_point(x);
                    let chi = p1_values(x);
                    let grad_of = |c: &[f64]| vector_gradient(&local_vector(&spaces.velocity, mesh, c, t), &grads);
                    let pressure_of = |c: &[f64]| {
                        let l = local_scalar(&spaces.pressure, mesh, c, t);
                        l[0] * chi[0] + l[1] * chi[1] + l[2] * chi[2]
                    };
                    let v = f(&grad_of, &pressure_of, be.normal);
                    match mode {
                        TractionInterpretation::FullVector => v,
                        TractionInterpretation::NormalProjected => {
                            let s = v[0] * be.normal[0] + v[1] * be.normal[1];
                            [s * be.normal[0], s * be.normal[1]]
                        }
                    }
                })
            })
            .collect();
        TractionTrace { edges }
    }

    /// Solid response `N t` to an interface traction (no body force).
    pub fn solid_response(&self, traction: &TractionTrace) -> Result<Vec<f64>, FsiError> {
        let load = self.elasticity.load(&self.mesh, None, traction);
        Ok(self.elasticity.solve_load(&load)?)
    }

    fn relative_increment(&self, new: &[f64], old: &[f64]) -> f64 {
        let diff = self.solid_norm.norm(&sub(new, old));
        if diff == 0.0 {
            0.0
        } else {
            diff / self.solid_norm.norm(new).max(f64::MIN_POSITIVE)
        }
    }

    /// Coupled solve by relaxed fixed-point iteration on the displacement.
    pub fn solve_fsi(&self, g: &InflowData, opts: &CouplingOptions) -> Result<FsiState, FsiError> {
        self.solve_fsi_from(g, opts, None)
    }

    /// [`FsiProblem::solve_fsi`] starting from a given displacement.
    pub fn solve_fsi_from(&self, g: &InflowData, opts: &CouplingOptions, start: Option<&[f64]>) -> Result<FsiState, FsiError> {
        opts.validate()?;
        g.check_admissible(self.fluid.channel_height())?;
        let bc = self.fluid.inflow_bc(g);
        let data = FluidData::none();
        let n = self.elasticity.space().n_dofs();
        let mut u = start.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
        let mut warm: Option<FluidState> = None;
        let mut report = SolverReport::default();
        let mut log = Vec::new();
        let mut above = 0;
        for k in 1..=opts.max_outer_iter {
            let (phi, fields) = self.pullback(&u).map_err(|source| FsiError::Tangled {
                iteration: k,
                source,
                displacement: u.clone(),
            })?;
            let (state, fr) = self.fluid.solve_navier_stokes(
                Some(&fields),
                &bc,
                &data,
                &opts.fluid,
                if opts.warm_start { warm.as_ref() } else { None },
            )?;
            let t = self.traction(&phi, &state.pressure, opts.traction);
            let target = self.solid_response(&t)?;
            let w = opts.relaxation;
            let next: Vec<f64> = u.iter().zip(&target).map(|(a, b)| (1.0 - w) * a + w * b).collect();
            let incr = self.relative_increment(&next, &u);
            let ratio = report.push(incr);
            log.push(OuterRecord {
                iteration: k,
                increment: incr,
                ratio,
                fluid_iterations: fr.iterations,
                min_det: fields.min_det(),
                min_diffusion_eig: fields.min_diffusion_eig(),
            });
            log::debug!("outer {k}: du = {incr:.3e}, fluid iterations {}", fr.iterations);
            u = next;
            warm = Some(state);
            if incr <= opts.tol {
                report.converged = true;
                break;
            }
            above = if ratio.is_some_and(|r| r >= 1.0) || !incr.is_finite() { above + 1 } else { 0 };
            if above >= opts.divergence_window {
                return Err(FsiError::Diverged {
                    consecutive: above,
                    report,
                });
            }
        }
        if !report.converged {
            return Err(FsiError::NotConverged { report });
        }
        // fluid consistent with the final displacement
        let iteration = report.iterations + 1;
        let (extension, fields) = self.pullback(&u).map_err(|source| FsiError::Tangled {
            iteration,
            source,
            displacement: u.clone(),
        })?;
        let (fluid, _) = self.fluid.solve_navier_stokes(Some(&fields), &bc, &data, &opts.fluid, warm.as_ref())?;
        Ok(FsiState {
            displacement: u,
            extension,
            fields,
            fluid,
            report,
            log,
        })
    }

    /// Coupled residual of a displacement and fluid state; the pullback
    /// fields are recomputed from `u`.
    pub fn fsi_residual(
        &self,
        u: &[f64],
        fluid: &FluidState,
        g: &InflowData,
        mode: TractionInterpretation,
    ) -> Result<FsiResidual, FsiError> {
        let (phi, fields) = self.pullback(u)?;
        let c = self.fluid.constraints(&self.fluid.inflow_bc(g))?;
        // Dirichlet mismatch counts toward the fluid residual
        let mut r = self.fluid.residual_vector(Some(&fields), fluid, &vec![0.0; self.fluid.spaces().dim()])?;
        let flat = fluid.to_flat();
        for (d, v) in c.iter() {
            r[d] = flat[d] - v;
        }
        let t = self.traction(&phi, &fluid.pressure, mode);
        let load = self.elasticity.load(&self.mesh, None, &t);
        let mut e = self.elasticity.stiffness().mul_vec(u);
        for (ei, bi) in e.iter_mut().zip(&load) {
            *ei -= bi;
        }
        for &d in self.elasticity.clamped_dofs() {
            e[d] = u[d];
        }
        let target = self.elasticity.solve_load(&load)?;
        Ok(FsiResidual {
            fluid: norm2(&r),
            elasticity: norm2(&e),
            fixed_point: self.solid_norm.norm(&sub(u, &target)),
        })
    }

    pub fn residual_of(&self, state: &FsiState, g: &InflowData, mode: TractionInterpretation) -> Result<FsiResidual, FsiError> {
        self.fsi_residual(&state.displacement, &state.fluid, g, mode)
    }
}

//! Derivative of the inflow-to-state map of the coupled problem.
//!
//! The displacement sensitivity is the fixed point of
//! `δu ↦ N δt(δu, δz(δg, δu))`, where `δz` solves the fluid equations
//! linearized at the base state with inflow data `δg` and the shape terms
//! of `δu`, and `δt` is the linearized traction. A monolithic assembly of
//! the same linear system serves as the oracle on small meshes.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FsiError, SensitivityError};
use crate::fem::space::boundary_dofs;
use crate::fem::system::{Constraints, FactoredSystem};
use crate::fluid::{FluidState, InflowData, LinearizedMode, LinearizedOperator};
use crate::fsi::{CouplingOptions, FsiProblem, FsiState, TractionInterpretation};
use crate::linalg::csr::sub;
use crate::linalg::TripletBuilder;
use crate::mesh::BoundaryTag;
use crate::report::{loglog_slope, SolverReport};

/// Relative increments below this are at the roundoff level of the solves.
const ROUNDOFF_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivityOptions {
    /// relative H¹ increment of `δu`
    pub tol: f64,
    pub max_iter: usize,
    /// consecutive increment ratios ≥ 1 that count as non-contraction
    pub window: usize,
}

impl Default for SensitivityOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            window: 3,
        }
    }
}

/// `(δu, δw, δp)` with the record of the fixed-point loop.
#[derive(Clone, Debug)]
pub struct SensitivityState {
    pub displacement: Vec<f64>,
    pub fluid: FluidState,
    pub report: SolverReport,
}

/// Linearization of the coupled problem at a converged base state. Holds
/// the factored linearized fluid operator.
pub struct Linearization<'a> {
    problem: &'a FsiProblem,
    base: &'a FsiState,
    operator: LinearizedOperator,
    traction: TractionInterpretation,
}

impl<'a> Linearization<'a> {
    pub fn new(problem: &'a FsiProblem, base: &'a FsiState, traction: TractionInterpretation) -> Result<Self, SensitivityError> {
        let operator = problem
            .fluid()
            .linearize(Some(&base.fields), &base.fluid, LinearizedMode::Direct)?;
        Ok(Self {
            problem,
            base,
            operator,
            traction,
        })
    }

    pub fn problem(&self) -> &FsiProblem {
        self.problem
    }

    pub fn base(&self) -> &FsiState {
        self.base
    }

    fn inflow_constraints(&self, dg: &InflowData) -> Result<Constraints, SensitivityError> {
        let fluid = self.problem.fluid();
        Ok(fluid.constraints(&fluid.inflow_bc(dg))?)
    }

    /// Fluid response to the inflow direction `δg` at fixed geometry.
    pub fn wrt_g(&self, dg: &InflowData) -> Result<FluidState, SensitivityError> {
        let zero = vec![0.0; self.problem.fluid().spaces().dim()];
        let (z, _) = self.operator.solve(self.problem.fluid(), &zero, &self.inflow_constraints(dg)?)?;
        Ok(FluidState::from_flat(self.problem.fluid().spaces(), &z))
    }

    /// Fluid response to a displacement direction `δu` at fixed inflow.
    pub fn wrt_u(&self, du: &[f64]) -> Result<FluidState, SensitivityError> {
        let (z, _) = self.fluid_response(&InflowData::default(), du)?;
        Ok(z)
    }

    /// One linearized solve with both the inflow data and the shape terms
    /// of `δu`; also returns the extension increment of `δu`.
    fn fluid_response(&self, dg: &InflowData, du: &[f64]) -> Result<(FluidState, Vec<f64>), SensitivityError> {
        let fluid = self.problem.fluid();
        let dphi = self.problem.extend_displacement(du)?;
        let mut rhs = fluid.shape_derivative(Some(&self.base.fields), &self.base.fluid, &dphi);
        rhs.iter_mut().for_each(|v| *v = -*v);
        let (z, _) = self.operator.solve(fluid, &rhs, &self.inflow_constraints(dg)?)?;
        Ok((FluidState::from_flat(fluid.spaces(), &z), dphi))
    }

    /// `N δt` for a given extension increment and fluid increment.
    fn solid_update(&self, dphi: &[f64], dz: &FluidState) -> Result<Vec<f64>, SensitivityError> {
        let dt = self.problem.traction_derivative(
            &self.base.extension,
            &self.base.fluid.pressure,
            dphi,
            &dz.pressure,
            self.traction,
        );
        self.problem.solid_response(&dt).map_err(SensitivityError::Fsi)
    }

    /// The linear map `δu ↦ N δt(δu, δz(0, δu))` whose contraction drives
    /// the derivative fixed point.
    pub fn coupling_map(&self, du: &[f64]) -> Result<Vec<f64>, SensitivityError> {
        let (dz, dphi) = self.fluid_response(&InflowData::default(), du)?;
        self.solid_update(&dphi, &dz)
    }

    /// Fixed-point sensitivity solve for inflow direction `δg`.
    pub fn solve(&self, dg: &InflowData, opts: &SensitivityOptions) -> Result<SensitivityState, SensitivityError> {
        let n = self.problem.elasticity().space().n_dofs();
        let norm = self.problem.solid_norm();
        let mut du = vec![0.0; n];
        let mut report = SolverReport::default();
        let mut above = 0;
        for _ in 0..opts.max_iter {
            let (dz, dphi) = self.fluid_response(dg, &du)?;
            let next = self.solid_update(&dphi, &dz)?;
            let diff = norm.norm(&sub(&next, &du));
            let incr = if diff == 0.0 { 0.0 } else { diff / norm.norm(&next).max(f64::MIN_POSITIVE) };
            let ratio = report.push(incr);
            du = next;
            if incr <= opts.tol {
                report.converged = true;
                break;
            }
            // growth among roundoff-level increments is noise, not divergence
            let growing = ratio.is_some_and(|r| r >= 1.0) && incr > ROUNDOFF_FLOOR;
            above = if growing || !incr.is_finite() { above + 1 } else { 0 };
            if above >= opts.window {
                let ratio = report.asymptotic_ratio().unwrap_or(f64::INFINITY);
                return Err(SensitivityError::NonContraction { ratio, report });
            }
        }
        if !report.converged {
            return Err(SensitivityError::NotConverged { report });
        }
        let (fluid, _) = self.fluid_response(dg, &du)?;
        Ok(SensitivityState {
            displacement: du,
            fluid,
            report,
        })
    }

    /// Solid dofs on the interface, the only inputs the coupling map sees.
    pub fn interface_dofs(&self) -> Result<Vec<usize>, SensitivityError> {
        let mesh = self.problem.mesh();
        Ok(boundary_dofs(mesh, self.problem.elasticity().space(), BoundaryTag::Interface)?)
    }

    /// Dense matrix of the coupling map restricted to interface dofs
    /// (row-major, rows and columns ordered as [`Linearization::interface_dofs`]).
    /// Its nonzero spectrum is that of the full map.
    pub fn interface_coupling_matrix(&self) -> Result<(Vec<usize>, Vec<Vec<f64>>), SensitivityError> {
        let dofs = self.interface_dofs()?;
        let n = self.problem.elasticity().space().n_dofs();
        let cols: Vec<Vec<f64>> = dofs
            .par_iter()
            .map(|&j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                let col = self.coupling_map(&e)?;
                Ok(dofs.iter().map(|&i| col[i]).collect())
            })
            .collect::<Result<_, SensitivityError>>()?;
        let m = dofs.len();
        let rows = (0..m).map(|i| (0..m).map(|j| cols[j][i]).collect()).collect();
        Ok((dofs, rows))
    }

    /// Spectral-radius estimate of the coupling map by power iteration from
    /// `samples` random interface directions: the largest geometric-mean
    /// growth factor over the last half of `iterations` steps.
    pub fn spectral_radius_estimate(&self, samples: usize, iterations: usize, seed: u64) -> Result<f64, SensitivityError> {
        let dofs = self.interface_dofs()?;
        let n = self.problem.elasticity().space().n_dofs();
        let norm = self.problem.solid_norm();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let starts: Vec<Vec<f64>> = (0..samples)
            .map(|_| {
                let mut v = vec![0.0; n];
                for &d in &dofs {
                    v[d] = rng.random_range(-1.0..1.0);
                }
                v
            })
            .collect();
        let estimates = starts
            .par_iter()
            .map(|start| {
                let mut x = start.clone();
                let s = norm.norm(&x);
                x.iter_mut().for_each(|v| *v /= s);
                let mut logs = Vec::with_capacity(iterations);
                for _ in 0..iterations {
                    let y = self.coupling_map(&x)?;
                    let s = norm.norm(&y);
                    if s == 0.0 {
                        return Ok(0.0);
                    }
                    logs.push(s.ln());
                    x = y.into_iter().map(|v| v / s).collect();
                }
                let tail = &logs[iterations / 2..];
                Ok((tail.iter().sum::<f64>() / tail.len() as f64).exp())
            })
            .collect::<Result<Vec<f64>, SensitivityError>>()?;
        Ok(estimates.into_iter().fold(0.0, f64::max))
    }

    /// Increment record of the constant-coefficient fluid iteration for the
    /// inflow direction `δg`, divergence included.
    pub fn t_iteration_report(&self, dg: &InflowData, tol: f64, max_iter: usize) -> Result<SolverReport, SensitivityError> {
        let fluid = self.problem.fluid();
        let op = fluid.linearize(Some(&self.base.fields), &self.base.fluid, LinearizedMode::TIteration { tol, max_iter })?;
        let zero = vec![0.0; fluid.spaces().dim()];
        match op.solve(fluid, &zero, &self.inflow_constraints(dg)?) {
            Ok((_, r)) => Ok(r),
            Err(crate::error::FluidError::Diverged { report }) => Ok(report),
            Err(e) => Err(e.into()),
        }
    }

    /// Oracle: one sparse solve of the coupled linear system in
    /// `(δu, δw, δp)`. Intended for small meshes; its cost grows with the
    /// number of interface dofs.
    pub fn solve_monolithic(&self, dg: &InflowData) -> Result<SensitivityState, SensitivityError> {
        let problem = self.problem;
        let fluid = problem.fluid();
        let spaces = fluid.spaces();
        let ns = problem.elasticity().space().n_dofs();
        let nf = spaces.dim();
        let nv = spaces.n_velocity();
        let mut a = TripletBuilder::new(ns + nf, ns + nf);
        for (i, j, v) in problem.elasticity().stiffness().triplets() {
            a.push(i, j, v);
        }
        for (i, j, v) in self.operator.matrix().triplets() {
            a.push(ns + i, ns + j, v);
        }
        let shape = fluid.shape_derivative_matrix(Some(&self.base.fields), &self.base.fluid);
        // δu columns: shape terms in the fluid rows, cofactor part of the traction in the solid rows
        let dofs = self.interface_dofs()?;
        let zero_p = vec![0.0; spaces.n_pressure()];
        let cols: Vec<(usize, Vec<f64>, Vec<f64>)> = dofs
            .par_iter()
            .map(|&j| {
                let mut e = vec![0.0; ns];
                e[j] = 1.0;
                let dphi = problem.extend_displacement(&e)?;
                let dt = problem.traction_derivative(&self.base.extension, &self.base.fluid.pressure, &dphi, &zero_p, self.traction);
                let load = problem.elasticity().load(problem.mesh(), None, &dt);
                Ok::<_, FsiError>((j, shape.mul_vec(&dphi), load))
            })
            .collect::<Result<_, _>>()?;
        for (j, fluid_col, solid_col) in &cols {
            for (i, v) in fluid_col.iter().enumerate() {
                if *v != 0.0 {
                    a.push(ns + i, *j, *v);
                }
            }
            for (i, v) in solid_col.iter().enumerate() {
                if *v != 0.0 {
                    a.push(i, *j, -v);
                }
            }
        }
        // δp columns: pressure part of the traction
        let zero_phi = vec![0.0; nv];
        let mut pressure_dofs: Vec<usize> = problem
            .mesh()
            .edges_with_tag(BoundaryTag::Interface)
            .flat_map(|be| spaces.pressure.p1_element_nodes(problem.mesh(), be.triangle))
            .collect();
        pressure_dofs.sort_unstable();
        pressure_dofs.dedup();
        let pcols: Vec<(usize, Vec<f64>)> = pressure_dofs
            .par_iter()
            .map(|&m| {
                let mut e = vec![0.0; spaces.n_pressure()];
                e[m] = 1.0;
                let dt = problem.traction_derivative(&self.base.extension, &self.base.fluid.pressure, &zero_phi, &e, self.traction);
                (m, problem.elasticity().load(problem.mesh(), None, &dt))
            })
            .collect();
        for (m, col) in &pcols {
            for (i, v) in col.iter().enumerate() {
                if *v != 0.0 {
                    a.push(i, ns + nv + m, -v);
                }
            }
        }
        let mut c = Constraints::new();
        for &d in problem.elasticity().clamped_dofs() {
            c.set(d, 0.0)?;
        }
        for (d, v) in self.inflow_constraints(dg)?.iter() {
            c.set(ns + d, v)?;
        }
        let system = FactoredSystem::new(&a.build(), &c.dofs())?;
        let x = system.solve(&vec![0.0; ns + nf], &c)?;
        let mut report = SolverReport::default();
        report.push(0.0);
        report.converged = true;
        Ok(SensitivityState {
            displacement: x[..ns].to_vec(),
            fluid: FluidState::from_flat(spaces, &x[ns..]),
            report,
        })
    }
}

/// Convenience: linearize at `base` and run the fixed-point solve.
pub fn solve_fsi_sensitivity(
    problem: &FsiProblem,
    base: &FsiState,
    dg: &InflowData,
    traction: TractionInterpretation,
    opts: &SensitivityOptions,
) -> Result<SensitivityState, SensitivityError> {
    Linearization::new(problem, base, traction)?.solve(dg, opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaylorOptions {
    pub coupling: CouplingOptions,
    pub sensitivity: SensitivityOptions,
    /// slope every component must reach
    pub min_slope: f64,
}

impl Default for TaylorOptions {
    fn default() -> Self {
        let mut coupling = CouplingOptions {
            tol: 1e-12,
            ..CouplingOptions::default()
        };
        coupling.fluid.tol = 1e-12;
        coupling.fluid.max_iter = 100;
        Self {
            coupling,
            sensitivity: SensitivityOptions {
                tol: 1e-12,
                ..SensitivityOptions::default()
            },
            min_slope: 1.8,
        }
    }
}

/// Remainders of one step size.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaylorRow {
    pub step: f64,
    pub valid: bool,
    pub displacement: f64,
    pub velocity: f64,
    pub pressure: f64,
}

/// First-order Taylor remainders `‖Π(g + hδg) − Π(g) − hΠ′(g)δg‖` per
/// component: H¹ for displacement and velocity, L² for pressure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaylorReport {
    pub rows: Vec<TaylorRow>,
    pub slope_displacement: f64,
    pub slope_velocity: f64,
    pub slope_pressure: f64,
    pub derivative_norms: [f64; 3],
    pub min_slope: f64,
    pub passed: bool,
}

impl TaylorReport {
    /// CSV with columns `h,r_u,r_w,r_p,valid`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,r_u,r_w,r_p,valid\n");
        for r in &self.rows {
            writeln!(
                s,
                "{:.6e},{:.17e},{:.17e},{:.17e},{}",
                r.step, r.displacement, r.velocity, r.pressure, r.valid
            )
            .unwrap();
        }
        s
    }

    pub fn slopes(&self) -> [f64; 3] {
        [self.slope_displacement, self.slope_velocity, self.slope_pressure]
    }
}

/// Runs the base solve, the sensitivity solve and one perturbed coupled
/// solve per step (concurrently), then fits remainder slopes.
pub fn taylor_test(
    problem: &FsiProblem,
    g: &InflowData,
    dg: &InflowData,
    steps: &[f64],
    opts: &TaylorOptions,
) -> Result<TaylorReport, SensitivityError> {
    if steps.iter().any(|&h| !(h > 0.0)) || steps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(SensitivityError::BadSteps);
    }
    let base = problem.solve_fsi(g, &opts.coupling)?;
    let sens = solve_fsi_sensitivity(problem, &base, dg, opts.coupling.traction, &opts.sensitivity)?;
    let fluid = problem.fluid();
    let solid = problem.solid_norm();
    let rows: Vec<TaylorRow> = steps
        .par_iter()
        .map(|&h| match problem.solve_fsi(&g.axpy(h, dg), &opts.coupling) {
            Ok(s) => {
                let rem = |x: &[f64], x0: &[f64], d: &[f64]| -> Vec<f64> {
                    x.iter().zip(x0).zip(d).map(|((a, b), c)| a - b - h * c).collect()
                };
                TaylorRow {
                    step: h,
                    valid: true,
                    displacement: solid.norm(&rem(&s.displacement, &base.displacement, &sens.displacement)),
                    velocity: fluid
                        .velocity_norm()
                        .norm(&rem(&s.fluid.velocity, &base.fluid.velocity, &sens.fluid.velocity)),
                    pressure: fluid
                        .pressure_norm()
                        .norm(&rem(&s.fluid.pressure, &base.fluid.pressure, &sens.fluid.pressure)),
                }
            }
            Err(e) => {
                log::warn!("taylor step {h:e} invalid: {e}");
                TaylorRow {
                    step: h,
                    valid: false,
                    displacement: f64::NAN,
                    velocity: f64::NAN,
                    pressure: f64::NAN,
                }
            }
        })
        .collect();
    let valid: Vec<&TaylorRow> = rows.iter().filter(|r| r.valid).collect();
    if valid.len() < 3 {
        return Err(SensitivityError::TooFewSteps(valid.len()));
    }
    let hs: Vec<f64> = valid.iter().map(|r| r.step).collect();
    let slope = |f: fn(&TaylorRow) -> f64| loglog_slope(&hs, &valid.iter().map(|r| f(r)).collect::<Vec<_>>());
    let (su, sw, sp) = (slope(|r| r.displacement), slope(|r| r.velocity), slope(|r| r.pressure));
    let derivative_norms = [
        solid.norm(&sens.displacement),
        fluid.velocity_norm().norm(&sens.fluid.velocity),
        fluid.pressure_norm().norm(&sens.fluid.pressure),
    ];
    let passed = [su, sw, sp].iter().all(|&s| s >= opts.min_slope);
    Ok(TaylorReport {
        rows,
        slope_displacement: su,
        slope_velocity: sw,
        slope_pressure: sp,
        derivative_norms,
        min_slope: opts.min_slope,
        passed,
    })
}

/// Contraction measurements at one inflow magnitude.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRow {
    pub magnitude: f64,
    /// mean increment ratio of the fluid fixed point at the base state
    pub picard_ratio: f64,
    /// asymptotic ratio of the coupled outer loop
    pub outer_ratio: f64,
    /// power-iteration estimate for the derivative coupling map
    pub coupling_radius: f64,
    /// asymptotic ratio of the constant-coefficient linearized iteration
    pub t_iteration_ratio: f64,
}

/// Sweeps inflow magnitudes (same profile shape as `g`), solving the
/// coupled problem and measuring every contraction constant.
pub fn contraction_probe(
    problem: &FsiProblem,
    g: &InflowData,
    magnitudes: &[f64],
    coupling: &CouplingOptions,
    samples: usize,
    seed: u64,
) -> Result<Vec<ProbeRow>, SensitivityError> {
    let reference = g.terms.first().map(|t| t.magnitude).unwrap_or(1.0);
    magnitudes
        .iter()
        .map(|&m| {
            let gm = g.scaled(if reference == 0.0 { 0.0 } else { m / reference });
            let base = problem.solve_fsi(&gm, coupling)?;
            let bc = problem.fluid().inflow_bc(&gm);
            let (_, fr) = problem.fluid().solve_navier_stokes(
                Some(&base.fields),
                &bc,
                &crate::fluid::FluidData::none(),
                &coupling.fluid,
                None,
            )?;
            let lin = Linearization::new(problem, &base, coupling.traction)?;
            let t = lin.t_iteration_report(&gm.scaled(1.0 / m.max(f64::MIN_POSITIVE)), 1e-12, 100)?;
            Ok(ProbeRow {
                magnitude: m,
                picard_ratio: fr.mean_ratio().unwrap_or(0.0),
                outer_ratio: base.report.asymptotic_ratio().unwrap_or(0.0),
                coupling_radius: lin.spectral_radius_estimate(samples, 30, seed)?,
                t_iteration_ratio: t.asymptotic_ratio().unwrap_or(0.0),
            })
        })
        .collect()
}

/// CSV with columns `magnitude,picard_ratio,outer_ratio,coupling_radius,t_ratio`.
pub fn probe_csv(rows: &[ProbeRow]) -> String {
    let mut s = String::from("magnitude,picard_ratio,outer_ratio,coupling_radius,t_ratio\n");
    for r in rows {
        writeln!(
            s,
            "{:.6e},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.magnitude, r.picard_ratio, r.outer_ratio, r.coupling_radius, r.t_iteration_ratio
        )
        .unwrap();
    }
    s
}

/// Relative difference of two sensitivity states in the report norms.
pub fn sensitivity_difference(problem: &FsiProblem, a: &SensitivityState, b: &SensitivityState) -> [f64; 3] {
    let fluid = problem.fluid();
    let rel = |n: f64, d: f64| if d == 0.0 { n } else { n / d };
    [
        rel(
            problem.solid_norm().norm(&sub(&a.displacement, &b.displacement)),
            problem.solid_norm().norm(&b.displacement),
        ),
        rel(
            fluid.velocity_norm().norm(&sub(&a.fluid.velocity, &b.fluid.velocity)),
            fluid.velocity_norm().norm(&b.fluid.velocity),
        ),
        rel(
            fluid.pressure_norm().norm(&sub(&a.fluid.pressure, &b.fluid.pressure)),
            fluid.pressure_norm().norm(&b.fluid.pressure),
        ),
    ]
}

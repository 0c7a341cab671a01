//! Manufactured solutions for the untransformed equations and a mesh
//! convergence study on the unit square.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{FluidError, MeshError};
use crate::fem::norms::{scalar_l2_error, vector_errors};
use crate::linalg::Mat2;
use crate::mesh::{build_channel_mesh, refine_uniform, ChannelGeometry};
use crate::report::loglog_slope;

use super::{FluidData, FluidOptions, FluidProblem};

/// A smooth velocity–pressure pair with the derivatives needed to build
/// matching data.
pub trait ExactFlow: Send + Sync {
    fn name(&self) -> &'static str;
    fn velocity(&self, x: [f64; 2]) -> [f64; 2];
    /// `(Dw)_ij = ∂_j w_i`
    fn gradient(&self, x: [f64; 2]) -> Mat2;
    fn laplacian(&self, x: [f64; 2]) -> [f64; 2];
    fn pressure(&self, x: [f64; 2]) -> f64;
    fn pressure_gradient(&self, x: [f64; 2]) -> [f64; 2];
}

/// Divergence-free trigonometric pair:
/// `w = (sin πx cos πy, −cos πx sin πy)`, `p = sin πx sin πy`.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrigFlow;

impl ExactFlow for TrigFlow {
    fn name(&self) -> &'static str {
        "trig"
    }

    fn velocity(&self, [x, y]: [f64; 2]) -> [f64; 2] {
        let (sx, cx, sy, cy) = trig(x, y);
        [sx * cy, -cx * sy]
    }

    fn gradient(&self, [x, y]: [f64; 2]) -> Mat2 {
        let (sx, cx, sy, cy) = trig(x, y);
        let pi = std::f64::consts::PI;
        Mat2::new(pi * cx * cy, -pi * sx * sy, pi * sx * sy, -pi * cx * cy)
    }

    fn laplacian(&self, x: [f64; 2]) -> [f64; 2] {
        let s = -2.0 * std::f64::consts::PI.powi(2);
        self.velocity(x).map(|v| s * v)
    }

    fn pressure(&self, [x, y]: [f64; 2]) -> f64 {
        let (sx, _, sy, _) = trig(x, y);
        sx * sy
    }

    fn pressure_gradient(&self, [x, y]: [f64; 2]) -> [f64; 2] {
        let (sx, cx, sy, cy) = trig(x, y);
        let pi = std::f64::consts::PI;
        [pi * cx * sy, pi * sx * cy]
    }
}

fn trig(x: f64, y: f64) -> (f64, f64, f64, f64) {
    let pi = std::f64::consts::PI;
    let (sx, cx) = (pi * x).sin_cos();
    let (sy, cy) = (pi * y).sin_cos();
    (sx, cx, sy, cy)
}

/// Quadratic velocity and linear pressure, both inside the Taylor–Hood
/// spaces: `w = (x² + y², −2xy)`, `p = x − y`.
#[derive(Clone, Copy, Debug, Default)]
pub struct PolynomialFlow;

impl ExactFlow for PolynomialFlow {
    fn name(&self) -> &'static str {
        "polynomial"
    }

    fn velocity(&self, [x, y]: [f64; 2]) -> [f64; 2] {
        [x * x + y * y, -2.0 * x * y]
    }

    fn gradient(&self, [x, y]: [f64; 2]) -> Mat2 {
        Mat2::new(2.0 * x, 2.0 * y, -2.0 * y, -2.0 * x)
    }

    fn laplacian(&self, _: [f64; 2]) -> [f64; 2] {
        [4.0, 0.0]
    }

    fn pressure(&self, [x, y]: [f64; 2]) -> f64 {
        x - y
    }

    fn pressure_gradient(&self, _: [f64; 2]) -> [f64; 2] {
        [1.0, -1.0]
    }
}

/// Volume force, divergence and outflow data for which `exact` solves the
/// untransformed equations with viscosity `nu`, plus its Dirichlet trace.
pub fn manufactured_data(exact: Arc<dyn ExactFlow>, nu: f64) -> (FluidData, super::DirichletFn) {
    let e1 = Arc::clone(&exact);
    let force = Arc::new(move |x: [f64; 2]| {
        let lap = e1.laplacian(x);
        let adv = e1.gradient(x).mul_vec(e1.velocity(x));
        let gp = e1.pressure_gradient(x);
        [-nu * lap[0] + adv[0] + gp[0], -nu * lap[1] + adv[1] + gp[1]]
    });
    let e2 = Arc::clone(&exact);
    let divergence = Arc::new(move |x: [f64; 2]| e2.gradient(x).trace());
    let e3 = Arc::clone(&exact);
    let outflow = Arc::new(move |x: [f64; 2], n: [f64; 2]| {
        let dn = e3.gradient(x).mul_vec(n);
        let p = e3.pressure(x);
        [nu * dn[0] - p * n[0], nu * dn[1] - p * n[1]]
    });
    let e4 = exact;
    let bc: super::DirichletFn = Arc::new(move |x, _| e4.velocity(x));
    (
        FluidData {
            force: Some(force),
            divergence: Some(divergence),
            outflow: Some(outflow),
        },
        bc,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceLevel {
    pub h: f64,
    pub dofs: usize,
    pub velocity_h1: f64,
    pub velocity_l2: f64,
    pub pressure_l2: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub solution: String,
    pub viscosity: f64,
    pub levels: Vec<ConvergenceLevel>,
    /// least-squares slopes of error against `h`
    pub velocity_h1_rate: f64,
    pub velocity_l2_rate: f64,
    pub pressure_l2_rate: f64,
}

impl ConvergenceStudy {
    /// Observed orders between consecutive levels for the velocity H¹ error.
    pub fn pairwise_velocity_rates(&self) -> Vec<f64> {
        self.levels
            .windows(2)
            .map(|w| (w[0].velocity_h1 / w[1].velocity_h1).ln() / (w[0].h / w[1].h).ln())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,dofs,velocity_h1,velocity_l2,pressure_l2,iterations\n");
        for l in &self.levels {
            s.push_str(&format!(
                "{:.6e},{},{:.17e},{:.17e},{:.17e},{}\n",
                l.h, l.dofs, l.velocity_h1, l.velocity_l2, l.pressure_l2, l.iterations
            ));
        }
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
}

/// Solves on the unit square with structured spacing `coarse_h` and
/// `levels − 1` uniform refinements, measuring errors against `exact`.
pub fn convergence_study(
    exact: Arc<dyn ExactFlow>,
    nu: f64,
    coarse_h: f64,
    levels: usize,
    opts: &FluidOptions,
) -> Result<ConvergenceStudy, StudyError> {
    let mut mesh = build_channel_mesh(&ChannelGeometry::straight(1.0, 1.0, coarse_h))?;
    let (data, bc) = manufactured_data(Arc::clone(&exact), nu);
    let mut out = Vec::with_capacity(levels);
    let mut h = coarse_h;
    for level in 0..levels {
        if level > 0 {
            mesh = refine_uniform(&mesh);
            h /= 2.0;
        }
        let mesh_arc = Arc::new(mesh.clone());
        let problem = FluidProblem::new(Arc::clone(&mesh_arc), nu)?;
        let (state, report) = problem.solve_navier_stokes(None, &bc, &data, opts, None)?;
        let spaces = problem.spaces();
        let ex = Arc::clone(&exact);
        let (velocity_h1, velocity_l2) = vector_errors(&mesh_arc, &spaces.velocity, &state.velocity, &move |x| {
            (ex.velocity(x), ex.gradient(x))
        });
        let ex = Arc::clone(&exact);
        let pressure_l2 = scalar_l2_error(&mesh_arc, &spaces.pressure, &state.pressure, &move |x| ex.pressure(x));
        out.push(ConvergenceLevel {
            h,
            dofs: spaces.dim(),
            velocity_h1,
            velocity_l2,
            pressure_l2,
            iterations: report.iterations,
        });
    }
    let hs: Vec<f64> = out.iter().map(|l| l.h).collect();
    let rate = |f: fn(&ConvergenceLevel) -> f64| loglog_slope(&hs, &out.iter().map(f).collect::<Vec<_>>());
    Ok(ConvergenceStudy {
        solution: exact.name().to_string(),
        viscosity: nu,
        velocity_h1_rate: rate(|l| l.velocity_h1),
        velocity_l2_rate: rate(|l| l.velocity_l2),
        pressure_l2_rate: rate(|l| l.pressure_l2),
        levels: out,
    })
}

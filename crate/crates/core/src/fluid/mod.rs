//! Transformed steady Navier–Stokes on the reference fluid domain and its
//! linearization.

mod linearized;
pub mod mms;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::FluidError;
use crate::fem::assembly::{assemble_rhs, convection_vector, oseen_matrix, FluidSpaces};
use crate::fem::norms::NormMatrix;
use crate::fem::system::{Constraints, FactoredSystem};
use crate::geomap::TransformFields;
use crate::linalg::csr::{norm2, sub};
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::mesh::{BoundaryTag, Mesh};
use crate::report::SolverReport;

pub use linearized::{LinearizedOperator, LinearizedMode};

pub type VectorFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
/// Boundary data receiving the point and the outward unit normal.
pub type BoundaryFn = Arc<dyn Fn([f64; 2], [f64; 2]) -> [f64; 2] + Send + Sync>;
/// Dirichlet data receiving the point and the tag of the boundary part.
pub type DirichletFn = Arc<dyn Fn([f64; 2], BoundaryTag) -> [f64; 2] + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileShape {
    /// `4 s (1 − s)` with `s = y / H`
    Parabolic,
    /// `27/4 · s (1 − s)²`, peak at one third of the height
    Skewed,
}

/// Horizontal inflow `g(y) = magnitude · shape(y / H) · (1, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InflowProfile {
    pub magnitude: f64,
    pub shape: ProfileShape,
}

impl InflowProfile {
    pub fn parabolic(magnitude: f64) -> Self {
        Self {
            magnitude,
            shape: ProfileShape::Parabolic,
        }
    }

    pub fn with_magnitude(self, magnitude: f64) -> Self {
        Self { magnitude, ..self }
    }

    pub fn eval(&self, y: f64, height: f64) -> [f64; 2] {
        let s = y / height;
        let v = match self.shape {
            ProfileShape::Parabolic => 4.0 * s * (1.0 - s),
            ProfileShape::Skewed => 6.75 * s * (1.0 - s) * (1.0 - s),
        };
        [self.magnitude * v, 0.0]
    }

    /// Checks that the profile vanishes at both ends of the inflow segment.
    pub fn check_admissible(&self, height: f64) -> Result<(), FluidError> {
        let ends = [self.eval(0.0, height), self.eval(height, height)];
        let worst = ends.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        if worst > 1e-14 * self.magnitude.abs().max(1.0) || !self.magnitude.is_finite() {
            return Err(FluidError::InflowNotAdmissible(worst));
        }
        Ok(())
    }
}

/// Superposition of inflow profiles, so that perturbed data `g + h δg`
/// stay representable.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InflowData {
    pub terms: Vec<InflowProfile>,
}

impl InflowData {
    pub fn eval(&self, y: f64, height: f64) -> [f64; 2] {
        self.terms.iter().fold([0.0, 0.0], |acc, t| {
            let v = t.eval(y, height);
            [acc[0] + v[0], acc[1] + v[1]]
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|t| t.with_magnitude(s * t.magnitude)).collect(),
        }
    }

    /// `self + s · other`
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.scaled(s).terms);
        Self { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.magnitude == 0.0)
    }

    pub fn check_admissible(&self, height: f64) -> Result<(), FluidError> {
        self.terms.iter().try_for_each(|t| t.check_admissible(height))
    }

    /// Dirichlet data: the superposed profile on the inflow, zero elsewhere.
    pub fn dirichlet(&self, bottom: f64, height: f64) -> DirichletFn {
        let g = self.clone();
        Arc::new(move |x, tag| match tag {
            BoundaryTag::Inflow => g.eval(x[1] - bottom, height),
            _ => [0.0, 0.0],
        })
    }
}

impl From<InflowProfile> for InflowData {
    fn from(p: InflowProfile) -> Self {
        Self { terms: vec![p] }
    }
}

impl From<&InflowProfile> for InflowData {
    fn from(p: &InflowProfile) -> Self {
        Self { terms: vec![*p] }
    }
}

impl From<&InflowData> for InflowData {
    fn from(p: &InflowData) -> Self {
        p.clone()
    }
}

/// Volume force `f`, divergence data `f₂` and outflow load `f₃`. The outflow
/// load enters the weak form as `+∫_out f₃·ψ`.
#[derive(Clone, Default)]
pub struct FluidData {
    pub force: Option<VectorFn>,
    pub divergence: Option<ScalarFn>,
    pub outflow: Option<BoundaryFn>,
}

impl FluidData {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn load(&self, mesh: &Mesh, spaces: &FluidSpaces) -> Vec<f64> {
        let f3 = self.outflow.as_ref().map(|f| &**f as &dyn Fn([f64; 2], [f64; 2]) -> [f64; 2]);
        assemble_rhs(
            mesh,
            spaces,
            self.force.as_ref().map(|f| &**f as &(dyn Fn([f64; 2]) -> [f64; 2] + Sync)),
            self.divergence.as_ref().map(|f| &**f as &(dyn Fn([f64; 2]) -> f64 + Sync)),
            f3,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluidOptions {
    /// relative increment in the H¹×L² product norm
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FluidOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

/// Velocity and pressure coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct FluidState {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
}

impl FluidState {
    pub fn zeros(spaces: &FluidSpaces) -> Self {
        Self {
            velocity: vec![0.0; spaces.n_velocity()],
            pressure: vec![0.0; spaces.n_pressure()],
        }
    }

    pub fn from_flat(spaces: &FluidSpaces, x: &[f64]) -> Self {
        let (w, p) = spaces.split(x);
        Self {
            velocity: w.to_vec(),
            pressure: p.to_vec(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut x = self.velocity.clone();
        x.extend_from_slice(&self.pressure);
        x
    }
}

/// Everything about the fluid problem that does not depend on the solid
/// displacement: spaces, norms, and the factored identity-coefficient
/// Stokes operator used by the fixed-point map.
pub struct FluidProblem {
    mesh: Arc<Mesh>,
    spaces: FluidSpaces,
    nu: f64,
    stokes: CsrMatrix,
    stokes_factored: FactoredSystem,
    dirichlet_dofs: Vec<usize>,
    velocity_norm: NormMatrix,
    pressure_norm: NormMatrix,
    bottom: f64,
    height: f64,
    convection: bool,
}

/// Tags carrying velocity Dirichlet conditions.
pub const DIRICHLET_TAGS: [BoundaryTag; 3] = [BoundaryTag::Wall, BoundaryTag::Inflow, BoundaryTag::Interface];

impl FluidProblem {
    pub fn new(mesh: Arc<Mesh>, nu: f64) -> Result<Self, FluidError> {
        assert!(nu > 0.0 && nu.is_finite(), "viscosity must be positive");
        let spaces = FluidSpaces::new(&mesh);
        let stokes = oseen_matrix(&mesh, &spaces, None, None, None, nu)?;
        let mut dofs = Vec::new();
        for tag in DIRICHLET_TAGS {
            if mesh.has_tag(tag) {
                dofs.extend(crate::fem::space::boundary_dofs(&mesh, &spaces.velocity, tag)?);
            }
        }
        dofs.sort_unstable();
        dofs.dedup();
        let stokes_factored = FactoredSystem::new(&stokes, &dofs)?;
        let velocity_norm = NormMatrix::h1_vector(&mesh, &spaces.velocity);
        let pressure_norm = NormMatrix::l2_scalar(&mesh, &spaces.pressure);
        let (_, y0, _, y1) = mesh.bounding_box();
        Ok(Self {
            mesh,
            spaces,
            nu,
            stokes,
            stokes_factored,
            dirichlet_dofs: dofs,
            velocity_norm,
            pressure_norm,
            bottom: y0,
            height: y1 - y0,
            convection: true,
        })
    }

    /// Drops the convection term everywhere (Stokes surrogate).
    pub fn without_convection(mut self) -> Self {
        self.convection = false;
        self
    }

    pub fn has_convection(&self) -> bool {
        self.convection
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn spaces(&self) -> &FluidSpaces {
        &self.spaces
    }

    pub fn viscosity(&self) -> f64 {
        self.nu
    }

    pub fn channel_height(&self) -> f64 {
        self.height
    }

    /// Dirichlet data for inflow `g` on this channel.
    pub fn inflow_bc(&self, g: impl Into<InflowData>) -> DirichletFn {
        g.into().dirichlet(self.bottom, self.height)
    }

    pub fn dirichlet_dofs(&self) -> &[usize] {
        &self.dirichlet_dofs
    }

    /// Identity-coefficient Stokes operator (unconstrained).
    pub fn stokes(&self) -> &CsrMatrix {
        &self.stokes
    }

    pub fn velocity_norm(&self) -> &NormMatrix {
        &self.velocity_norm
    }

    pub fn pressure_norm(&self) -> &NormMatrix {
        &self.pressure_norm
    }

    /// `sqrt(‖w‖²_{H¹} + ‖p‖²_{L²})` of a flat saddle vector.
    pub fn product_norm(&self, x: &[f64]) -> f64 {
        let (w, p) = self.spaces.split(x);
        (self.velocity_norm.norm(w).powi(2) + self.pressure_norm.norm(p).powi(2)).sqrt()
    }

    /// Velocity constraints from Dirichlet data, resolving shared corners
    /// by tag priority.
    pub fn constraints(&self, bc: &DirichletFn) -> Result<Constraints, FluidError> {
        let mut c = Constraints::new();
        for tag in DIRICHLET_TAGS {
            if self.mesh.has_tag(tag) {
                c.prescribe_tag(&self.mesh, &self.spaces.velocity, tag, 0, |x| bc(x, tag))?;
            }
        }
        Ok(c)
    }

    pub fn zero_constraints(&self) -> Constraints {
        let mut c = Constraints::new();
        for &d in &self.dirichlet_dofs {
            c.set(d, 0.0).expect("fresh constraint set");
        }
        c
    }

    /// Weak residual of the transformed Navier–Stokes equations on
    /// unconstrained rows: `M(fields) x + [c_K(w, w); 0] − F`.
    pub fn residual_vector(&self, fields: Option<&TransformFields>, state: &FluidState, load: &[f64]) -> Result<Vec<f64>, FluidError> {
        let m = oseen_matrix(&self.mesh, &self.spaces, fields, None, None, self.nu)?;
        Ok(self.residual_with(&m, fields, state, load))
    }

    fn residual_with(&self, m: &CsrMatrix, fields: Option<&TransformFields>, state: &FluidState, load: &[f64]) -> Vec<f64> {
        let x = state.to_flat();
        let mut r = m.mul_vec(&x);
        if self.convection {
            let c = convection_vector(&self.mesh, &self.spaces, fields, &state.velocity, &state.velocity);
            for (ri, ci) in r.iter_mut().zip(&c) {
                *ri += ci;
            }
        }
        for (ri, bi) in r.iter_mut().zip(load) {
            *ri -= bi;
        }
        for &d in &self.dirichlet_dofs {
            r[d] = 0.0;
        }
        r
    }

    pub fn residual_norm(&self, fields: Option<&TransformFields>, state: &FluidState, load: &[f64]) -> Result<f64, FluidError> {
        Ok(norm2(&self.residual_vector(fields, state, load)?))
    }

    /// Fixed-point solve of the transformed steady Navier–Stokes equations.
    ///
    /// Each iterate solves the identity-coefficient Stokes system whose load
    /// carries the coefficient perturbations `A − I`, `K − I` and the full
    /// transformed convection, all lagged at the previous iterate.
    pub fn solve_navier_stokes(
        &self,
        fields: Option<&TransformFields>,
        bc: &DirichletFn,
        data: &FluidData,
        opts: &FluidOptions,
        warm_start: Option<&FluidState>,
    ) -> Result<(FluidState, SolverReport), FluidError> {
        let load = data.load(&self.mesh, &self.spaces);
        self.solve_navier_stokes_with_load(fields, bc, &load, opts, warm_start)
    }

    pub fn solve_navier_stokes_with_load(
        &self,
        fields: Option<&TransformFields>,
        bc: &DirichletFn,
        load: &[f64],
        opts: &FluidOptions,
        warm_start: Option<&FluidState>,
    ) -> Result<(FluidState, SolverReport), FluidError> {
        let constraints = self.constraints(bc)?;
        // coefficient perturbation M(fields) − S; exactly zero for identity fields
        let perturbation = match fields {
            Some(f) => {
                let m = oseen_matrix(&self.mesh, &self.spaces, Some(f), None, None, self.nu)?;
                Some(difference(&m, &self.stokes))
            }
            None => None,
        };
        let mut x = match warm_start {
            Some(s) => s.to_flat(),
            None => vec![0.0; self.spaces.dim()],
        };
        // starting from zero makes the first iterate the Stokes solution
        let mut report = SolverReport::default();
        for _ in 0..opts.max_iter {
            let mut b = load.to_vec();
            if self.convection {
                let (w, _) = self.spaces.split(&x);
                let conv = convection_vector(&self.mesh, &self.spaces, fields, w, w);
                for (bi, ci) in b.iter_mut().zip(&conv) {
                    *bi -= ci;
                }
            }
            if let Some(p) = &perturbation {
                p.mul_vec_add(-1.0, &x, &mut b);
            }
            let next = self.stokes_factored.solve(&b, &constraints)?;
            let diff = self.product_norm(&sub(&next, &x));
            let size = self.product_norm(&next);
            let incr = if diff == 0.0 { 0.0 } else { diff / size.max(f64::MIN_POSITIVE) };
            x = next;
            report.push(incr);
            if !incr.is_finite() {
                break;
            }
            if incr <= opts.tol {
                report.converged = true;
                break;
            }
        }
        if !report.converged {
            return Err(FluidError::Diverged { report });
        }
        Ok((FluidState::from_flat(&self.spaces, &x), report))
    }

    /// Outflow functional `∫_out (ν (Dw A) n − p K n)·ψ` for every velocity
    /// test function, computed as the weak residual on the outflow rows
    /// (the discrete form of the natural condition).
    pub fn outflow_functional(&self, fields: Option<&TransformFields>, state: &FluidState, load: &[f64]) -> Result<Vec<(usize, f64)>, FluidError> {
        let r = self.residual_vector(fields, state, load)?;
        let dofs = crate::fem::space::boundary_dofs(&self.mesh, &self.spaces.velocity, BoundaryTag::Outflow)?;
        Ok(dofs.into_iter().map(|d| (d, r[d])).collect())
    }
}

/// `a − b` for matrices of equal shape.
pub(crate) fn difference(a: &CsrMatrix, b: &CsrMatrix) -> CsrMatrix {
    let mut t = TripletBuilder::with_capacity(a.nrows(), a.ncols(), a.nnz() + b.nnz());
    for (i, j, v) in a.triplets() {
        t.push(i, j, v);
    }
    for (i, j, v) in b.triplets() {
        t.push(i, j, -v);
    }
    t.build()
}

//! Scenario execution. Each scenario sees the config projected onto the
//! keys it declares in the registry and returns its results and checks.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use channel_fsi::fem::{FeSpace, FluidSpaces, SpaceDescriptor};
use channel_fsi::fluid::mms::{convergence_study, ExactFlow, PolynomialFlow, TrigFlow};
use channel_fsi::fluid::{FluidData, FluidProblem};
use channel_fsi::fsi::{FsiProblem, FsiState};
use channel_fsi::geomap::ELLIPTICITY_FLOOR;
use channel_fsi::mesh::io::{to_vtk, PointData};
use channel_fsi::mesh::{build_channel_mesh, refine_uniform, validate, Mesh};
use channel_fsi::report::SolverReport;
use channel_fsi::sensitivity::{contraction_probe, probe_csv, taylor_test, Linearization};
use serde_json::{json, Value};

use crate::artifacts::{nodal_p1_scalar, nodal_vectors, ArtifactDir, Check, ErrorRecord, Status, Summary};
use crate::config::{ManufacturedSolution, Model, RunConfig};
use crate::error::CliError;
use crate::registry::Scenario;

/// Power-iteration steps of the coupling-radius estimate.
const POWER_ITERATIONS: usize = 30;
/// Slack on the observed derivative rate against the estimated radius;
/// the estimate is a lower bound after finitely many power steps.
const RADIUS_SLACK: f64 = 1.1;

type ScenarioResult = Result<(Value, Vec<Check>), CliError>;

/// Validates, runs and writes every artifact. Returns the summary and the
/// process exit code: 0 all checks passed, 1 some check failed, otherwise
/// the error category of [`CliError::exit_code`].
pub fn execute(scenario: Scenario, config: &RunConfig, out: &Path) -> Result<(Summary, u8), CliError> {
    config.validate()?;
    let view = config.project(scenario.spec().reads);
    let mut dir = ArtifactDir::create(out, &config.content_hash())?;
    let mut summary = Summary::new(scenario, config);
    log::info!("running {scenario} into {}", out.display());
    let code = match run_scenario(scenario, &view, &mut dir) {
        Ok((results, checks)) => {
            summary.results = results;
            summary.status = if checks.iter().all(|c| c.passed) {
                Status::Passed
            } else {
                Status::Failed
            };
            summary.checks = checks;
            if summary.passed() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            log::error!("{e}");
            summary.status = Status::Error;
            summary.error = Some(ErrorRecord {
                category: e.category(),
                exit_code: e.exit_code(),
                message: e.to_string(),
            });
            e.exit_code()
        }
    };
    dir.finish(&summary)?;
    Ok((summary, code))
}

fn run_scenario(scenario: Scenario, cfg: &RunConfig, dir: &mut ArtifactDir) -> ScenarioResult {
    match scenario {
        Scenario::Mesh => mesh(cfg, dir),
        Scenario::SolveNs => solve_ns(cfg, dir),
        Scenario::SolveFsi => solve_fsi(cfg, dir),
        Scenario::Sensitivity => sensitivity(cfg, dir),
        Scenario::TaylorTest => taylor(cfg, dir),
        Scenario::Mms => mms(cfg, dir),
        Scenario::Probes => probes(cfg, dir),
    }
}

fn build_mesh(cfg: &RunConfig) -> Result<Arc<Mesh>, CliError> {
    let mut mesh = build_channel_mesh(&cfg.geometry)?;
    for _ in 0..cfg.refinements {
        mesh = refine_uniform(&mesh);
    }
    Ok(Arc::new(mesh))
}

fn fsi_problem(cfg: &RunConfig, mesh: &Arc<Mesh>) -> Result<FsiProblem, CliError> {
    let problem = FsiProblem::new(Arc::clone(mesh), cfg.physics.viscosity, cfg.physics.lame)?;
    Ok(match cfg.physics.model {
        Model::Full => problem,
        Model::LinearSurrogate => problem.linear_surrogate(),
    })
}

fn all_cells(mesh: &Mesh) -> Vec<usize> {
    (0..mesh.n_triangles()).collect()
}

fn report_json(r: &SolverReport) -> Value {
    json!({
        "iterations": r.iterations,
        "converged": r.converged,
        "final_increment": r.final_increment(),
        "max_ratio": r.max_ratio(),
        "mean_ratio": r.mean_ratio(),
        "asymptotic_ratio": r.asymptotic_ratio(),
    })
}

/// Contraction check on the largest increment ratio; a loop that stops
/// after one step has no ratio and passes trivially.
fn contraction_check(name: &str, r: &SolverReport) -> Check {
    Check::below(name, r.max_ratio().unwrap_or(0.0), 1.0)
}

fn mesh(cfg: &RunConfig, dir: &mut ArtifactDir) -> ScenarioResult {
    let mesh = build_mesh(cfg)?;
    let report = validate(&mesh)?;
    dir.mesh(&mesh)?;
    dir.vtk("fields_mesh.vtk", &to_vtk(&mesh, &all_cells(&mesh), &[]))?;
    let mut csv = String::from("tag,edges,length\n");
    for (tag, count) in &report.tag_counts {
        let length = report.tag_lengths.get(tag).copied().unwrap_or(0.0);
        writeln!(csv, "{},{count},{length:.17e}", tag.name()).unwrap();
    }
    dir.csv("report_mesh.csv", &csv)?;
    let spaces = FluidSpaces::new(&mesh);
    let solid = FeSpace::new(&mesh, SpaceDescriptor::DISPLACEMENT);
    let checks = vec![
        Check::new(
            "positively oriented",
            report.min_area,
            "all triangles positively oriented",
            report.all_positively_oriented,
        ),
        Check::new("single component", report.components as f64, "== 1", report.components == 1),
        Check::new(
            "euler characteristic with holes is 1",
            report.euler_with_holes as f64,
            "== 1",
            report.euler_with_holes == 1,
        ),
    ];
    let results = json!({
        "validation": report,
        "fluid_dofs": spaces.dim(),
        "velocity_dofs": spaces.n_velocity(),
        "solid_dofs": solid.n_dofs(),
    });
    Ok((results, checks))
}

fn solve_ns(cfg: &RunConfig, dir: &mut ArtifactDir) -> ScenarioResult {
    let mesh = build_mesh(cfg)?;
    let fluid = FluidProblem::new(Arc::clone(&mesh), cfg.physics.viscosity)?;
    let bc = fluid.inflow_bc(cfg.inflow_data());
    let data = FluidData::none();
    let (state, report) = fluid.solve_navier_stokes(None, &bc, &data, &cfg.fluid, None)?;
    let load = data.load(&mesh, fluid.spaces());
    let residual = fluid.residual_norm(None, &state, &load)?;
    let spaces = fluid.spaces();

    dir.mesh(&mesh)?;
    let mut velocity = vec![[0.0; 2]; mesh.n_p2_nodes()];
    nodal_vectors(&mesh, &spaces.velocity, &state.velocity, &mut velocity);
    let pressure = nodal_p1_scalar(&mesh, &spaces.pressure, &state.pressure);
    let cells: Vec<usize> = spaces.velocity.elements().to_vec();
    dir.vtk(
        "fields_fluid.vtk",
        &to_vtk(&mesh, &cells, &[PointData::Vector("velocity", &velocity), PointData::Scalar("pressure", &pressure)]),
    )?;
    dir.csv("report_picard.csv", &report.to_csv())?;

    let checks = vec![
        Check::new("picard converged", report.iterations as f64, "converged", report.converged),
        contraction_check("picard increments contract", &report),
    ];
    let results = json!({
        "dofs": spaces.dim(),
        "picard": report_json(&report),
        "residual_norm": residual,
        "velocity_h1": fluid.velocity_norm().norm(&state.velocity),
        "pressure_l2": fluid.pressure_norm().norm(&state.pressure),
    });
    Ok((results, checks))
}

/// Velocity, pressure and a displacement field that is the solid
/// displacement on the obstacle and its extension in the fluid.
fn state_fields(problem: &FsiProblem, velocity: &[f64], pressure: &[f64], displacement: &[f64], extension: &[f64]) -> (Vec<[f64; 2]>, Vec<f64>, Vec<[f64; 2]>) {
    let mesh = problem.mesh();
    let spaces = problem.fluid().spaces();
    let mut v = vec![[0.0; 2]; mesh.n_p2_nodes()];
    nodal_vectors(mesh, &spaces.velocity, velocity, &mut v);
    let p = nodal_p1_scalar(mesh, &spaces.pressure, pressure);
    let mut d = vec![[0.0; 2]; mesh.n_p2_nodes()];
    nodal_vectors(mesh, &spaces.velocity, extension, &mut d);
    nodal_vectors(mesh, problem.elasticity().space(), displacement, &mut d);
    (v, p, d)
}

fn fsi_json(problem: &FsiProblem, state: &FsiState) -> Value {
    let fluid = problem.fluid();
    json!({
        "outer": report_json(&state.report),
        "min_det": state.fields.min_det(),
        "min_diffusion_eig": state.fields.min_diffusion_eig(),
        "displacement_h1": problem.solid_norm().norm(&state.displacement),
        "max_displacement": state.displacement.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        "velocity_h1": fluid.velocity_norm().norm(&state.fluid.velocity),
        "pressure_l2": fluid.pressure_norm().norm(&state.fluid.pressure),
    })
}

fn solve_fsi(cfg: &RunConfig, dir: &mut ArtifactDir) -> ScenarioResult {
    let mesh = build_mesh(cfg)?;
    let problem = fsi_problem(cfg, &mesh)?;
    let g = cfg.inflow_data();
    let state = problem.solve_fsi(&g, &cfg.coupling)?;
    let residual = problem.residual_of(&state, &g, cfg.coupling.traction)?;

    dir.mesh(&mesh)?;
    let (v, p, d) = state_fields(&problem, &state.fluid.velocity, &state.fluid.pressure, &state.displacement, &state.extension);
    dir.vtk(
        "fields_fsi.vtk",
        &to_vtk(
            &mesh,
            &all_cells(&mesh),
            &[PointData::Vector("velocity", &v), PointData::Scalar("pressure", &p), PointData::Vector("displacement", &d)],
        ),
    )?;
    dir.csv("report_outer.csv", &state.log_csv())?;
    dir.csv("report_quality.csv", &state.fields.quality_csv())?;

    let checks = vec![
        Check::new("flow map untangled", state.fields.min_det(), "> 0", state.fields.min_det() > 0.0),
        Check::at_least("diffusion field elliptic", state.fields.min_diffusion_eig(), ELLIPTICITY_FLOOR),
        contraction_check("outer increments contract", &state.report),
    ];
    let mut results = fsi_json(&problem, &state);
    results["residual"] = json!({
        "fluid": residual.fluid,
        "elasticity": residual.elasticity,
        "fixed_point": residual.fixed_point,
    });
    Ok((results, checks))
}

fn sensitivity(cfg: &RunConfig, dir: &mut ArtifactDir) -> ScenarioResult {
    let mesh = build_mesh(cfg)?;
    let problem = fsi_problem(cfg, &mesh)?;
    let base = problem.solve_fsi(&cfg.inflow_data(), &cfg.coupling)?;
    let lin = Linearization::new(&problem, &base, cfg.coupling.traction)?;
    let sens = lin.solve(&cfg.direction_data(), &cfg.sensitivity)?;
    let radius = lin.spectral_radius_estimate(cfg.probes.samples, POWER_ITERATIONS, cfg.seed)?;
    let d_extension = problem.extend_displacement(&sens.displacement)?;

    dir.mesh(&mesh)?;
    let (v, p, d) = state_fields(&problem, &base.fluid.velocity, &base.fluid.pressure, &base.displacement, &base.extension);
    let (dv, dp, dd) = state_fields(&problem, &sens.fluid.velocity, &sens.fluid.pressure, &sens.displacement, &d_extension);
    dir.vtk(
        "fields_sensitivity.vtk",
        &to_vtk(
            &mesh,
            &all_cells(&mesh),
            &[
                PointData::Vector("velocity", &v),
                PointData::Scalar("pressure", &p),
                PointData::Vector("displacement", &d),
                PointData::Vector("d_velocity", &dv),
                PointData::Scalar("d_pressure", &dp),
                PointData::Vector("d_displacement", &dd),
            ],
        ),
    )?;
    dir.csv("report_outer.csv", &base.log_csv())?;
    dir.csv("report_sensitivity.csv", &sens.report.to_csv())?;

    let observed = sens.report.asymptotic_ratio().unwrap_or(0.0);
    let checks = vec![
        contraction_check("derivative fixed point contracts", &sens.report),
        Check::below("coupling radius below one", radius, 1.0),
        Check::at_most("observed rate bounded by the radius", observed, RADIUS_SLACK * radius),
    ];
    let fluid = problem.fluid();
    let results = json!({
        "base": fsi_json(&problem, &base),
        "derivative": {
            "fixed_point": report_json(&sens.report),
            "coupling_radius": radius,
            "d_displacement_h1": problem.solid_norm().norm(&sens.displacement),
            "d_velocity_h1": fluid.velocity_norm().norm(&sens.fluid.velocity),
            "d_pressure_l2": fluid.pressure_norm().norm(&sens.fluid.pressure),
        },
    });
    Ok((results, checks))
}

fn taylor(cfg: &RunConfig, dir: &mut ArtifactDir) -> ScenarioResult {
    let mesh = build_mesh(cfg)?;
    let problem = fsi_problem(cfg, &mesh)?;
    let report = taylor_test(&problem, &cfg.inflow_data(), &cfg.direction_data(), &cfg.taylor.steps, &cfg.taylor.options())?;
    dir.mesh(&mesh)?;
    dir.csv("report_taylor.csv", &report.to_csv())?;
    let [su, sw, sp] = report.slopes();
    let min = cfg.taylor.min_slope;
    let checks = vec![
        Check::at_least("displacement slope", su, min),
        Check::at_least("velocity slope", sw, min),
        Check::at_least("pressure slope", sp, min),
    ];
    Ok((serde_json::to_value(&report).expect("report serializes"), checks))
}

fn mms(cfg: &RunConfig, dir: &mut ArtifactDir) -> ScenarioResult {
    let exact: Arc<dyn ExactFlow> = match cfg.mms.solution {
        ManufacturedSolution::Trig => Arc::new(TrigFlow),
        ManufacturedSolution::Polynomial => Arc::new(PolynomialFlow),
    };
    let study = convergence_study(exact, cfg.mms.viscosity, cfg.mms.coarse_h, cfg.mms.levels, &cfg.fluid)?;
    dir.csv("report_mms.csv", &study.to_csv())?;
    let checks = vec![
        Check::within("velocity H1 rate within 0.2 of 2", study.velocity_h1_rate, 2.0, 0.2),
        Check::within("pressure L2 rate within 0.3 of 2", study.pressure_l2_rate, 2.0, 0.3),
    ];
    let mut results = serde_json::to_value(&study).expect("study serializes");
    results["pairwise_velocity_rates"] = json!(study.pairwise_velocity_rates());
    Ok((results, checks))
}

fn probes(cfg: &RunConfig, dir: &mut ArtifactDir) -> ScenarioResult {
    let mesh = build_mesh(cfg)?;
    let problem = fsi_problem(cfg, &mesh)?;
    let rows = contraction_probe(
        &problem,
        &cfg.inflow_data(),
        &cfg.probes.magnitudes,
        &cfg.coupling,
        cfg.probes.samples,
        cfg.seed,
    )?;
    dir.csv("report_probes.csv", &probe_csv(&rows))?;
    let worst = rows
        .iter()
        .flat_map(|r| [r.picard_ratio, r.outer_ratio, r.coupling_radius, r.t_iteration_ratio])
        .fold(0.0f64, f64::max);
    let checks = vec![Check::below("all contraction constants below one", worst, 1.0)];
    Ok((json!({ "rows": rows }), checks))
}

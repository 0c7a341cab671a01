mod common;

use std::sync::Arc;

use channel_fsi::elasticity::{interface_trace, solve_elasticity, ElasticitySolver, LameParameters, TractionTrace};
use channel_fsi::fem::element::p2_ref_grads;
use channel_fsi::fem::{Constraints, FactoredSystem, FeFunction, FeSpace, FluidSpaces};
use channel_fsi::geomap::{HarmonicExtension, InterfaceTrace};
use channel_fsi::linalg::csr::dot;
use channel_fsi::linalg::Mat2;
use channel_fsi::mesh::{BoundaryTag, Mesh};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

const COARSE: f64 = 0.25;

fn unit_lame() -> LameParameters {
    LameParameters { lambda: 1.0, mu: 1.0 }
}

fn default_lame() -> LameParameters {
    LameParameters { lambda: 100.0, mu: 50.0 }
}

fn solver(mesh: &Mesh, lame: LameParameters) -> ElasticitySolver {
    ElasticitySolver::new(mesh, lame).unwrap()
}

/// Stiffness through the Voigt strain matrix `Bᵀ D B`, a layout the
/// library kernel does not use.
fn voigt_stiffness(mesh: &Mesh, space: &FeSpace, lame: LameParameters) -> DMatrix<f64> {
    let n = space.n_dofs();
    let (l, m) = (lame.lambda, lame.mu);
    let d = DMatrix::from_row_slice(3, 3, &[l + 2.0 * m, l, 0.0, l, l + 2.0 * m, 0.0, 0.0, 0.0, m]);
    let mut k = DMatrix::zeros(n, n);
    for &t in space.elements() {
        let v = mesh.triangles()[t].map(|i| mesh.nodes()[i]);
        let jac = Mat2::new(v[1][0] - v[0][0], v[2][0] - v[0][0], v[1][1] - v[0][1], v[2][1] - v[0][1]);
        let inv_t = jac.inverse().unwrap().transpose();
        let area = 0.5 * jac.det();
        let dofs = space.vector_element_dofs(mesh, t);
        for (bary, w) in strang_fix_rule() {
            let grads = p2_ref_grads([bary[1], bary[2]]).map(|g| inv_t.mul_vec(g));
            let mut b = DMatrix::zeros(3, 12);
            for (i, g) in grads.iter().enumerate() {
                b[(0, 2 * i)] = g[0];
                b[(1, 2 * i + 1)] = g[1];
                b[(2, 2 * i)] = g[1];
                b[(2, 2 * i + 1)] = g[0];
            }
            let local = b.transpose() * &d * b * (w * area);
            for (i, &di) in dofs.iter().enumerate() {
                for (j, &dj) in dofs.iter().enumerate() {
                    k[(di, dj)] += local[(i, j)];
                }
            }
        }
    }
    k
}

/// Dense clamped solve with identity rows at the clamped dofs.
fn dense_clamped_solve(k: &DMatrix<f64>, clamped: &[usize], load: &[f64]) -> Vec<f64> {
    let mut a = k.clone();
    let mut b = DVector::from_column_slice(load);
    for &c in clamped {
        a.row_mut(c).fill(0.0);
        a[(c, c)] = 1.0;
        b[c] = 0.0;
    }
    a.lu().solve(&b).unwrap().as_slice().to_vec()
}

fn random_clamped_vector(s: &ElasticitySolver, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..s.space().n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
    for &d in s.clamped_dofs() {
        v[d] = 0.0;
    }
    v
}

fn relative(a: &[f64], b: &[f64]) -> f64 {
    max_abs_diff(a, b) / max_abs(b)
}

#[test]
fn zero_data_gives_zero_displacement() {
    let mesh = default_mesh(COARSE);
    let u = solve_elasticity(&mesh, None, &TractionTrace::zeros(&mesh), default_lame()).unwrap();
    assert_eq!(max_abs(u.coeffs()), 0.0);
}

#[test]
fn solution_is_linear_in_the_load() {
    let mesh = default_mesh(COARSE);
    let s = solver(&mesh, default_lame());
    let t1 = TractionTrace::from_fn(&mesh, |_, n| [n[0], n[1]]);
    let t2 = TractionTrace::from_fn(&mesh, |x, _| [x[1] - 0.5, 0.3 * x[0]]);
    let body = |x: [f64; 2]| [x[0] * x[1], 1.0 - x[0]];
    let u1 = s.solve(&mesh, Some(&body), &t1).unwrap();
    let u2 = s.solve(&mesh, None, &t2).unwrap();
    let combined = s.solve(&mesh, Some(&body), &t1.add(&t2.scaled(-2.5))).unwrap();
    let expected: Vec<f64> = u1.coeffs().iter().zip(u2.coeffs()).map(|(a, b)| a - 2.5 * b).collect();
    assert!(relative(combined.coeffs(), &expected) < 1e-12);
}

#[test]
fn stiffness_matches_voigt_oracle() {
    let mesh = default_mesh(COARSE);
    for lame in [unit_lame(), default_lame()] {
        let s = solver(&mesh, lame);
        let oracle = voigt_stiffness(&mesh, s.space(), lame);
        let scale = oracle.amax();
        let dense = s.stiffness().to_dense();
        let worst = (0..dense.len())
            .flat_map(|i| (0..dense.len()).map(move |j| (i, j)))
            .fold(0.0f64, |w, (i, j)| w.max((dense[i][j] - oracle[(i, j)]).abs()));
        assert!(worst <= 1e-12 * scale, "{worst:e}");
    }
}

#[test]
fn uniform_normal_traction_matches_dense_oracle() {
    let mesh = default_mesh(COARSE);
    let traction = TractionTrace::from_fn(&mesh, |_, n| [1e-3 * n[0], 1e-3 * n[1]]);
    let s = solver(&mesh, unit_lame());
    let u = solve_elasticity(&mesh, None, &traction, unit_lame()).unwrap();
    let oracle = dense_clamped_solve(
        &voigt_stiffness(&mesh, s.space(), unit_lame()),
        s.clamped_dofs(),
        &s.load(&mesh, None, &traction),
    );
    assert!(max_abs(&oracle) > 0.0);
    assert!(relative(u.coeffs(), &oracle) < 1e-10);
}

#[test]
fn rigid_motions_are_in_the_kernel() {
    let mesh = default_mesh(COARSE);
    let s = solver(&mesh, default_lame());
    let scale = s.stiffness().values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for motion in [
        (|_: [f64; 2]| [1.0, 0.0]) as fn([f64; 2]) -> [f64; 2],
        |_| [0.0, 1.0],
        |x| [-(x[1] - 0.5), x[0] - 1.2],
    ] {
        let r = s.space().interpolate(&mesh, motion);
        let kr = s.stiffness().mul_vec(&r);
        assert!(max_abs(&kr) <= 1e-12 * scale * max_abs(&r), "{:e}", max_abs(&kr));
    }
}

#[test]
fn linear_field_passes_the_patch_test() {
    let mesh = default_mesh(COARSE);
    let s = solver(&mesh, default_lame());
    let linear = |x: [f64; 2]| [0.3 * x[0] - 0.1 * x[1] + 0.02, 0.2 * x[0] + 0.05 * x[1] - 0.1];
    let mut c = Constraints::new();
    for tag in [BoundaryTag::Clamped, BoundaryTag::Interface] {
        c.prescribe_tag(&mesh, s.space(), tag, 0, linear).unwrap();
    }
    let system = FactoredSystem::new(s.stiffness(), &c.dofs()).unwrap();
    let u = system.solve(&vec![0.0; s.space().n_dofs()], &c).unwrap();
    let exact = s.space().interpolate(&mesh, linear);
    assert!(relative(&u, &exact) < 1e-12, "{:e}", relative(&u, &exact));
}

#[test]
fn trace_of_zero_is_zero() {
    let mesh = default_mesh(COARSE);
    let s = solver(&mesh, default_lame());
    let u = FeFunction::zeros(Arc::clone(s.space()));
    assert_eq!(interface_trace(&mesh, &u), InterfaceTrace::zeros(&mesh));
}

#[test]
fn trace_evaluates_pointwise() {
    let mesh = default_mesh(COARSE);
    let s = solver(&mesh, default_lame());
    let f = |x: [f64; 2]| [x[0] * x[0] - x[1], (3.0 * x[1]).sin()];
    let u = FeFunction::new(Arc::clone(s.space()), s.space().interpolate(&mesh, f)).unwrap();
    let trace = interface_trace(&mesh, &u);
    assert!(!trace.is_empty());
    for (&n, v) in trace.nodes.iter().zip(&trace.values) {
        assert_eq!(*v, f(mesh.p2_coord(n)));
    }
}

#[test]
fn extension_prolongs_the_trace() {
    let mesh = default_mesh(COARSE);
    let traction = TractionTrace::from_fn(&mesh, |x, n| [n[0] + 0.2 * x[1], n[1]]);
    let u = solve_elasticity(&mesh, None, &traction, default_lame()).unwrap();
    let trace = interface_trace(&mesh, &u);
    let spaces = FluidSpaces::new(&mesh);
    let phi = HarmonicExtension::new(&mesh, Arc::clone(&spaces.velocity)).unwrap().extend(&trace).unwrap();
    let back = InterfaceTrace::from_field(&mesh, &spaces.velocity, &phi);
    assert_eq!(back, trace);
}

#[test]
fn stiffness_is_positive_on_clamped_fields() {
    let mesh = default_mesh(COARSE);
    let s = solver(&mesh, default_lame());
    let mass = channel_fsi::fem::NormMatrix::h1_vector(&mesh, s.space());
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let quotients: Vec<f64> = (0..50)
        .map(|_| {
            let v = random_clamped_vector(&s, &mut rng);
            s.stiffness().quad_form(&v) / mass.norm(&v).powi(2)
        })
        .collect();
    let min = quotients.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min > 0.0 && min.is_finite(), "{min}");
}

#[test]
fn solutions_satisfy_reciprocity() {
    let mesh = default_mesh(COARSE);
    let s = solver(&mesh, default_lame());
    let b1 = s.load(&mesh, None, &TractionTrace::from_fn(&mesh, |x, n| [n[0] + x[1], n[1]]));
    let b2 = s.load(&mesh, Some(&|x| [x[1] * x[1], 1.0 - x[0]]), &TractionTrace::from_fn(&mesh, |x, _| [0.2, x[0]]));
    let u1 = s.solve_load(&b1).unwrap();
    let u2 = s.solve_load(&b2).unwrap();
    let (a, b) = (dot(&u1, &b2), dot(&u2, &b1));
    assert!(a.abs() > 1e-6 * max_abs(&u1) * max_abs(&b2));
    assert!((a - b).abs() <= 1e-11 * a.abs().max(b.abs()), "{a} {b}");
}

#[test]
fn solve_has_small_residual() {
    let mesh = default_mesh(0.1);
    let s = solver(&mesh, default_lame());
    let load = s.load(&mesh, Some(&|x| [x[0].cos(), x[1]]), &TractionTrace::from_fn(&mesh, |_, n| [n[1], -n[0]]));
    let u = s.solve_load(&load).unwrap();
    assert!(s.relative_residual(&u, &load) <= 1e-10);
    for &d in s.clamped_dofs() {
        assert_eq!(u[d], 0.0);
    }
}

#[test]
fn lame_parameters_are_validated() {
    assert!(default_lame().validate().is_ok());
    assert!(LameParameters { lambda: 0.0, mu: 1.0 }.validate().is_ok());
    for bad in [
        LameParameters { lambda: 1.0, mu: 0.0 },
        LameParameters { lambda: -1.0, mu: 1.0 },
        LameParameters { lambda: 1.0, mu: f64::NAN },
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
    }
}

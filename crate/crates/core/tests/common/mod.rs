#![allow(dead_code)]

use std::sync::Arc;

use channel_fsi::elasticity::LameParameters;
use channel_fsi::fem::{FeSpace, FluidSpaces};
use channel_fsi::fluid::{InflowData, InflowProfile, ProfileShape};
use channel_fsi::fsi::FsiProblem;
use channel_fsi::geomap::{HarmonicExtension, InterfaceTrace, TransformFields};
use channel_fsi::linalg::{DirectSolver, TripletBuilder};
use channel_fsi::mesh::{build_channel_mesh, BoundaryTag, ChannelGeometry, Mesh, Subdomain};

pub fn default_mesh(h: f64) -> Arc<Mesh> {
    Arc::new(build_channel_mesh(&ChannelGeometry::default().with_edge_length(h)).unwrap())
}

pub fn straight_mesh(length: f64, height: f64, h: f64) -> Arc<Mesh> {
    Arc::new(build_channel_mesh(&ChannelGeometry::straight(length, height, h)).unwrap())
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

/// Interface displacement without any symmetry: a shear plus a dilation
/// about the obstacle centre.
pub fn skew_trace(mesh: &Mesh, amp: f64) -> InterfaceTrace {
    InterfaceTrace::from_fn(mesh, |x| {
        let (dx, dy) = (x[0] - 1.2, x[1] - 0.5);
        [amp * (dx + 0.7 * dy), amp * (0.4 * dx - 0.5 * dy + dx * dy)]
    })
}

/// Extension coefficients (velocity layout) and pullback fields of a trace.
pub fn extended_fields(mesh: &Mesh, spaces: &FluidSpaces, trace: &InterfaceTrace) -> (Vec<f64>, TransformFields) {
    let ext = HarmonicExtension::new(mesh, Arc::clone(&spaces.velocity)).unwrap();
    let phi = ext.extend(trace).unwrap();
    let fields = TransformFields::from_displacement_field(mesh, &spaces.velocity, &phi);
    (phi, fields)
}

/// Degree-5 seven-point rule in barycentric coordinates (weights sum to 1).
pub fn strang_fix_rule() -> Vec<([f64; 3], f64)> {
    let (a1, b1, w1) = (0.059_715_871_789_770, 0.470_142_064_105_115, 0.132_394_152_788_506);
    let (a2, b2, w2) = (0.797_426_985_353_087, 0.101_286_507_323_456, 0.125_939_180_544_827);
    let mut r = vec![([1.0 / 3.0; 3], 0.225)];
    for (a, b, w) in [(a1, b1, w1), (a2, b2, w2)] {
        r.push(([a, b, b], w));
        r.push(([b, a, b], w));
        r.push(([b, b, a], w));
    }
    r
}

/// Independent monolithic Newton solve of the untransformed steady
/// Navier–Stokes equations with do-nothing outflow, inflow data `g` and
/// no-slip elsewhere. Returns the flat saddle vector in the crate's dof
/// layout (velocity interleaved, then pressure).
pub fn newton_oracle(mesh: &Mesh, spaces: &FluidSpaces, nu: f64, g: &dyn Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let nv = spaces.n_velocity();
    let n = spaces.dim();
    let vdof = |node: usize, c: usize| 2 * spaces.velocity.node_of_mesh_node(node).unwrap() + c;
    let pdof = |node: usize| nv + spaces.pressure.node_of_mesh_node(node).unwrap();
    let mut bc: Vec<Option<f64>> = vec![None; n];
    // walls after the inflow, so no-slip wins at the corners
    for tag in [BoundaryTag::Inflow, BoundaryTag::Wall, BoundaryTag::Interface] {
        for be in mesh.edges_with_tag(tag) {
            for node in mesh.edge_p2_nodes(be) {
                let v = if tag == BoundaryTag::Inflow { g(mesh.p2_coord(node)) } else { [0.0; 2] };
                for c in 0..2 {
                    bc[vdof(node, c)] = Some(v[c]);
                }
            }
        }
    }
    let rule = strang_fix_rule();
    let fluid: Vec<usize> = (0..mesh.n_triangles())
        .filter(|&t| mesh.subdomains()[t] == Subdomain::Fluid)
        .collect();
    let mut x = vec![0.0; n];
    for (d, v) in bc.iter().enumerate() {
        if let Some(v) = v {
            x[d] = *v;
        }
    }
    for _ in 0..30 {
        let mut r = vec![0.0; n];
        let mut jac = TripletBuilder::new(n, n);
        for &t in &fluid {
            let tri = mesh.triangles()[t];
            let p = tri.map(|v| mesh.nodes()[v]);
            let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            let area = 0.5 * det;
            let gl1 = [(p[2][1] - p[0][1]) / det, -(p[2][0] - p[0][0]) / det];
            let gl2 = [-(p[1][1] - p[0][1]) / det, (p[1][0] - p[0][0]) / det];
            let gl = [[-gl1[0] - gl2[0], -gl1[1] - gl2[1]], gl1, gl2];
            let nodes = mesh.p2_nodes(t);
            let vd: Vec<[usize; 2]> = nodes.iter().map(|&m| [vdof(m, 0), vdof(m, 1)]).collect();
            let pd: Vec<usize> = tri.iter().map(|&v| pdof(v)).collect();
            let pairs = [(0, 1), (1, 2), (2, 0)];
            for (l, wq) in &rule {
                let w = wq * area;
                let mut nval = [0.0; 6];
                let mut ngrad = [[0.0; 2]; 6];
                for i in 0..3 {
                    nval[i] = l[i] * (2.0 * l[i] - 1.0);
                    ngrad[i] = [(4.0 * l[i] - 1.0) * gl[i][0], (4.0 * l[i] - 1.0) * gl[i][1]];
                }
                for (k, &(a, b)) in pairs.iter().enumerate() {
                    nval[3 + k] = 4.0 * l[a] * l[b];
                    ngrad[3 + k] = [
                        4.0 * (l[a] * gl[b][0] + l[b] * gl[a][0]),
                        4.0 * (l[a] * gl[b][1] + l[b] * gl[a][1]),
                    ];
                }
                let mut u = [0.0; 2];
                let mut du = [[0.0; 2]; 2]; // du[c][k] = ∂_k u_c
                for j in 0..6 {
                    for c in 0..2 {
                        let xv = x[vd[j][c]];
                        u[c] += nval[j] * xv;
                        du[c][0] += ngrad[j][0] * xv;
                        du[c][1] += ngrad[j][1] * xv;
                    }
                }
                let pq: f64 = (0..3).map(|m| l[m] * x[pd[m]]).sum();
                let div = du[0][0] + du[1][1];
                for i in 0..6 {
                    for c in 0..2 {
                        let row = vd[i][c];
                        let visc = nu * (ngrad[i][0] * du[c][0] + ngrad[i][1] * du[c][1]);
                        let conv = nval[i] * (u[0] * du[c][0] + u[1] * du[c][1]);
                        r[row] += w * (visc + conv - pq * ngrad[i][c]);
                        for j in 0..6 {
                            let lap = nu * (ngrad[i][0] * ngrad[j][0] + ngrad[i][1] * ngrad[j][1]);
                            let adv = nval[i] * (u[0] * ngrad[j][0] + u[1] * ngrad[j][1]);
                            jac.push(row, vd[j][c], w * (lap + adv));
                            for d in 0..2 {
                                jac.push(row, vd[j][d], w * nval[i] * nval[j] * du[c][d]);
                            }
                        }
                        for m in 0..3 {
                            jac.push(row, pd[m], -w * l[m] * ngrad[i][c]);
                        }
                    }
                }
                for m in 0..3 {
                    r[pd[m]] += w * l[m] * div;
                    for j in 0..6 {
                        for c in 0..2 {
                            jac.push(pd[m], vd[j][c], w * l[m] * ngrad[j][c]);
                        }
                    }
                }
            }
        }
        let jac = jac.build();
        let mut rows = TripletBuilder::new(n, n);
        for (i, j, v) in jac.triplets() {
            if bc[i].is_none() {
                rows.push(i, j, v);
            }
        }
        for (d, v) in bc.iter().enumerate() {
            if let Some(v) = v {
                rows.push(d, d, 1.0);
                r[d] = x[d] - v;
            }
        }
        let step = DirectSolver::new(rows.build()).unwrap().solve(&r).unwrap();
        for (xi, s) in x.iter_mut().zip(&step) {
            *xi -= s;
        }
        if max_abs(&step) < 1e-14 * max_abs(&x).max(1.0) {
            return x;
        }
    }
    panic!("newton oracle did not converge");
}

/// Largest deviation from mirror symmetry about the channel mid-line of a
/// vector field (`x` component even, `y` component odd).
pub fn mirror_defect_vector(mesh: &Mesh, space: &FeSpace, v: &[f64]) -> f64 {
    let perm = mesh.mirror_permutation().expect("mesh is mirror-symmetric");
    (0..space.n_nodes()).fold(0.0, |worst, n| {
        let m = space.node_of_mesh_node(perm[space.mesh_node(n)]).unwrap();
        worst
            .max((v[2 * n] - v[2 * m]).abs())
            .max((v[2 * n + 1] + v[2 * m + 1]).abs())
    })
}

/// Largest deviation from mirror symmetry of a scalar field.
pub fn mirror_defect_scalar(mesh: &Mesh, space: &FeSpace, p: &[f64]) -> f64 {
    let perm = mesh.mirror_permutation().expect("mesh is mirror-symmetric");
    (0..space.n_nodes()).fold(0.0, |worst, n| {
        let m = space.node_of_mesh_node(perm[space.mesh_node(n)]).unwrap();
        worst.max((p[n] - p[m]).abs())
    })
}

/// Default operating point: ν = 1, λ = 100, μ = 50.
pub fn default_problem(h: f64) -> FsiProblem {
    FsiProblem::new(default_mesh(h), 1.0, LameParameters { lambda: 100.0, mu: 50.0 }).unwrap()
}

pub fn parabolic(magnitude: f64) -> InflowData {
    InflowProfile::parabolic(magnitude).into()
}

pub fn skewed(magnitude: f64) -> InflowData {
    InflowProfile { magnitude, shape: ProfileShape::Skewed }.into()
}

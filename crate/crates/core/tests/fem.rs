mod common;

use std::collections::BTreeSet;

use channel_fsi::error::{FemError, SolverError};
use channel_fsi::fem::assembly::{
    assemble_rhs, basis_integrals, scalar_p1_laplace_matrix, vector_laplace_matrix, vector_mass_matrix,
};
use channel_fsi::fem::element::{p2_ref_grads, p2_values, Element};
use channel_fsi::fem::{
    assemble_transformed_oseen, boundary_dofs, oseen_matrix, solve_sparse, Constraints, FactoredSystem, FeSpace,
    FluidSpaces, NormMatrix, SaddleSystem, SpaceDescriptor,
};
use channel_fsi::geomap::TransformFields;
use channel_fsi::linalg::{CsrMatrix, Mat2, TripletBuilder};
use channel_fsi::mesh::{BoundaryTag, Mesh, Subdomain};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

const COARSE: f64 = 0.3;

fn dense(a: &CsrMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplets() {
        d[(i, j)] += v;
    }
    d
}

/// Per-element transform data for the oracle: `(A, K)`.
type ElementTransform = (Mat2, Mat2);

/// Test-side Taylor–Hood assembler of `ν∫Dψ:(Dw A) − ∫p K:Dψ + ∫q K:Dw`
/// with transform data constant on each element, using the seven-point
/// rule and gradients mapped by hand.
fn oracle_oseen(mesh: &Mesh, spaces: &FluidSpaces, nu: f64, transform: &dyn Fn(usize) -> ElementTransform) -> DMatrix<f64> {
    let n = spaces.dim();
    let mut out = DMatrix::zeros(n, n);
    for (e, &t) in spaces.velocity.elements().iter().enumerate() {
        let v = mesh.triangles()[t].map(|i| mesh.nodes()[i]);
        let jac = Mat2::new(v[1][0] - v[0][0], v[2][0] - v[0][0], v[1][1] - v[0][1], v[2][1] - v[0][1]);
        let inv_t = jac.inverse().unwrap().transpose();
        let area = 0.5 * jac.det();
        let dofs = spaces.element_dofs(mesh, t);
        let (a, k) = transform(e);
        for (bary, w) in strang_fix_rule() {
            let w = w * area;
            let g = p2_ref_grads([bary[1], bary[2]]).map(|r| inv_t.mul_vec(r));
            let mut local = [[0.0; 15]; 15];
            for i in 0..6 {
                for j in 0..6 {
                    // Dψ:(Dw A) for ψ = φ_i e_c, w = φ_j e_c is ∇φ_jᵀ A ∇φ_i
                    let s = nu * w * (0..2).map(|r| (0..2).map(|c| g[j][r] * a.0[r][c] * g[i][c]).sum::<f64>()).sum::<f64>();
                    local[2 * i][2 * j] += s;
                    local[2 * i + 1][2 * j + 1] += s;
                }
                for (kk, &chi) in bary.iter().enumerate() {
                    let kg = k.mul_vec(g[i]);
                    for d in 0..2 {
                        local[2 * i + d][12 + kk] -= w * chi * kg[d];
                        local[12 + kk][2 * i + d] += w * chi * kg[d];
                    }
                }
            }
            for (li, &di) in dofs.iter().enumerate() {
                for (lj, &dj) in dofs.iter().enumerate() {
                    out[(di, dj)] += local[li][lj];
                }
            }
        }
    }
    out
}

fn max_entry_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax()
}

#[test]
fn identity_transform_reduces_to_plain_stokes() {
    let mesh = default_mesh(COARSE);
    let spaces = FluidSpaces::new(&mesh);
    let oracle = oracle_oseen(&mesh, &spaces, 0.7, &|_| (Mat2::IDENTITY, Mat2::IDENTITY));
    let none = oseen_matrix(&mesh, &spaces, None, None, None, 0.7).unwrap();
    let identity = TransformFields::identity(&spaces.velocity);
    let with_fields = oseen_matrix(&mesh, &spaces, Some(&identity), None, None, 0.7).unwrap();
    assert!(max_entry_gap(&dense(&none), &oracle) <= 1e-14);
    assert!(max_entry_gap(&dense(&with_fields), &oracle) <= 1e-14);
    let stokes = channel_fsi::fem::stokes_matrix(&mesh, &spaces, 0.7);
    assert!(max_entry_gap(&dense(&stokes), &oracle) <= 1e-14);
}

#[test]
fn reference_triangle_p1_laplacian() {
    let mesh = Mesh::from_parts(
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        vec![[0, 1, 2]],
        vec![Subdomain::Fluid],
        vec![],
    )
    .unwrap();
    let space = FeSpace::new(&mesh, SpaceDescriptor::PRESSURE);
    let k = scalar_p1_laplace_matrix(&mesh, &space).to_dense();
    let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
    for (row, exp) in k.iter().zip(expected) {
        for (v, e) in row.iter().zip(exp) {
            assert!((v - e).abs() < 1e-15);
        }
    }
}

/// P2 interpolant of a P1 field with random vertex values, so the
/// Jacobian is constant on each element.
fn random_affine_displacement(mesh: &Mesh, space: &FeSpace, amp: f64, seed: u64) -> (Vec<f64>, Vec<[f64; 2]>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertex: Vec<[f64; 2]> = (0..mesh.n_vertices())
        .map(|_| [amp * rng.random_range(-1.0..1.0), amp * rng.random_range(-1.0..1.0)])
        .collect();
    let mut phi = vec![0.0; space.n_dofs()];
    for &t in space.elements() {
        let tri = mesh.triangles()[t];
        let nodes = space.p2_element_nodes(mesh, t);
        let mids = [[0, 1], [1, 2], [2, 0]];
        for (k, &n) in nodes.iter().enumerate() {
            let val = if k < 3 {
                vertex[tri[k]]
            } else {
                // midpoint ordering follows the P2 basis: edges 01, 12, 20
                let [a, b] = mids[k - 3].map(|i| vertex[tri[i]]);
                [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
            };
            phi[2 * n] = val[0];
            phi[2 * n + 1] = val[1];
        }
    }
    (phi, vertex)
}

#[test]
fn piecewise_constant_transform_matches_quadrature_oracle() {
    let mesh = default_mesh(COARSE);
    let spaces = FluidSpaces::new(&mesh);
    let (phi, vertex) = random_affine_displacement(&mesh, &spaces.velocity, 0.01, 17);
    let fields = TransformFields::from_displacement_field(&mesh, &spaces.velocity, &phi);
    let elements = spaces.velocity.elements().to_vec();
    let transform = |e: usize| {
        let t = elements[e];
        let el = Element::new(&mesh, t);
        let tri = mesh.triangles()[t];
        // D(x + φ) with φ linear on the triangle
        let mut j = Mat2::IDENTITY;
        for (k, g) in el.p1_grads().iter().enumerate() {
            j = j + Mat2::outer(vertex[tri[k]], *g);
        }
        let k = j.cofactor();
        ((k.transpose() * k).scale(1.0 / j.det()), k)
    };
    let oracle = oracle_oseen(&mesh, &spaces, 1.3, &transform);
    let m = oseen_matrix(&mesh, &spaces, Some(&fields), None, None, 1.3).unwrap();
    let gap = max_entry_gap(&dense(&m), &oracle);
    assert!(gap <= 1e-12, "{gap:e}");
}

#[test]
fn non_positive_jacobian_is_reported_with_element() {
    let mesh = default_mesh(COARSE);
    let spaces = FluidSpaces::new(&mesh);
    let (phi, _) = random_affine_displacement(&mesh, &spaces.velocity, 0.5, 3);
    let fields = TransformFields::from_displacement_field(&mesh, &spaces.velocity, &phi);
    match oseen_matrix(&mesh, &spaces, Some(&fields), None, None, 1.0) {
        Err(FemError::NonPositiveJacobian { element, det }) => {
            assert!(det <= 0.0);
            assert_eq!(mesh.subdomains()[element], Subdomain::Fluid);
        }
        other => panic!("expected a Jacobian error, got {:?}", other.map(|m| m.nnz())),
    }
}

#[test]
fn pressure_blocks_are_negative_transposes() {
    let mesh = default_mesh(COARSE);
    let spaces = FluidSpaces::new(&mesh);
    let (_, fields) = extended_fields(&mesh, &spaces, &skew_trace(&mesh, 0.03));
    let s = assemble_transformed_oseen(&mesh, &spaces, Some(&fields), None, None, 1.0).unwrap();
    let b1 = dense(&s.block(0, 1));
    let b2 = dense(&s.block(1, 0));
    assert!(b1.amax() > 0.0);
    assert_eq!(b2, -b1.transpose());
    assert_eq!(dense(&s.block(1, 1)).amax(), 0.0);
}

#[test]
fn velocity_block_is_spd_on_constrained_subspace() {
    let mesh = default_mesh(COARSE);
    let spaces = FluidSpaces::new(&mesh);
    let (_, fields) = extended_fields(&mesh, &spaces, &skew_trace(&mesh, 0.03));
    assert!(fields.min_diffusion_eig() > 0.0);
    let s = assemble_transformed_oseen(&mesh, &spaces, Some(&fields), None, None, 1.0).unwrap();
    let a = s.block(0, 0);
    let ad = dense(&a);
    assert!((&ad - ad.transpose()).amax() <= 1e-14 * ad.amax());
    let fixed: BTreeSet<usize> = [BoundaryTag::Inflow, BoundaryTag::Wall, BoundaryTag::Interface]
        .iter()
        .flat_map(|&t| boundary_dofs(&mesh, &spaces.velocity, t).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let v: Vec<f64> = (0..a.nrows())
            .map(|d| if fixed.contains(&d) { 0.0 } else { rng.random_range(-1.0..1.0) })
            .collect();
        assert!(a.quad_form(&v) > 0.0);
    }
}

#[test]
fn coercivity_probe_is_positive_at_default_point() {
    let p = default_problem(0.1);
    let base = p.solve_fsi(&parabolic(0.05), &Default::default()).unwrap();
    let (mesh, fluid) = (p.mesh(), p.fluid());
    let w = &base.fluid.velocity;
    let s = assemble_transformed_oseen(mesh, fluid.spaces(), Some(&base.fields), Some(w), Some(w), fluid.viscosity())
        .unwrap();
    let b = s.block(0, 0);
    let h1 = NormMatrix::h1_vector(mesh, &fluid.spaces().velocity);
    let fixed: BTreeSet<usize> = fluid.dirichlet_dofs().iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let min = (0..100)
        .map(|_| {
            let v: Vec<f64> = (0..b.nrows())
                .map(|d| if fixed.contains(&d) { 0.0 } else { rng.random_range(-1.0..1.0) })
                .collect();
            b.quad_form(&v) / h1.norm(&v).powi(2)
        })
        .fold(f64::INFINITY, f64::min);
    assert!(min > 0.0, "{min}");
}

#[test]
fn zero_data_gives_zero_load() {
    let mesh = default_mesh(COARSE);
    let spaces = FluidSpaces::new(&mesh);
    assert_eq!(max_abs(&assemble_rhs(&mesh, &spaces, None, None, None)), 0.0);
    let zero_f = |_: [f64; 2]| [0.0, 0.0];
    let zero_f2 = |_: [f64; 2]| 0.0;
    let zero_f3 = |_: [f64; 2], _: [f64; 2]| [0.0, 0.0];
    let b = assemble_rhs(&mesh, &spaces, Some(&zero_f), Some(&zero_f2), Some(&zero_f3));
    assert_eq!(max_abs(&b), 0.0);
}

#[test]
fn constant_load_integrates_basis_functions() {
    let mesh = default_mesh(COARSE);
    let spaces = FluidSpaces::new(&mesh);
    let c = [2.0, -0.5];
    let b = assemble_rhs(&mesh, &spaces, Some(&move |_| c), None, None);
    let weights = basis_integrals(&mesh, &spaces.velocity);
    let mass = vector_mass_matrix(&mesh, &spaces.velocity);
    let row_sums = mass.mul_vec(&vec![1.0; spaces.n_velocity()]);
    for d in 0..spaces.n_velocity() {
        assert!((b[d] - c[d % 2] * weights[d]).abs() < 1e-15);
        assert!((row_sums[d] - weights[d]).abs() < 1e-15);
    }
    // the basis sums to one, so one component of the weights sums to the area
    let area = mesh.subdomain_area(Subdomain::Fluid);
    let total: f64 = weights.iter().step_by(2).sum();
    assert!((total - area).abs() < 1e-12);
    assert_eq!(max_abs(&b[spaces.n_velocity()..]), 0.0);
}

#[test]
fn outflow_data_is_supported_on_outflow_dofs() {
    let mesh = default_mesh(COARSE);
    let spaces = FluidSpaces::new(&mesh);
    let f3 = |x: [f64; 2], n: [f64; 2]| [1.0 + x[1] * n[0], 1.0];
    let b = assemble_rhs(&mesh, &spaces, None, None, Some(&f3));
    let support: BTreeSet<usize> = (0..b.len()).filter(|&d| b[d] != 0.0).collect();
    let outflow: BTreeSet<usize> = boundary_dofs(&mesh, &spaces.velocity, BoundaryTag::Outflow)
        .unwrap()
        .into_iter()
        .collect();
    assert_eq!(support, outflow);
    // ∫_out 1 ds is the channel height
    let sum_y: f64 = outflow.iter().filter(|&&d| d % 2 == 1).map(|&d| b[d]).sum();
    assert!((sum_y - 1.0).abs() < 1e-13, "{sum_y}");
}

fn laplace_system(mesh: &Mesh, space: &FeSpace, rhs: Vec<f64>) -> SaddleSystem {
    SaddleSystem {
        matrix: vector_laplace_matrix(mesh, space),
        rhs,
        n_velocity: space.n_dofs(),
        n_pressure: 0,
    }
}

#[test]
fn zero_prescription_on_laplace_gives_zero() {
    let mesh = default_mesh(COARSE);
    let spaces = FluidSpaces::new(&mesh);
    let mut c = Constraints::new();
    for tag in [BoundaryTag::Inflow, BoundaryTag::Wall, BoundaryTag::Outflow, BoundaryTag::Interface] {
        c.prescribe_tag(&mesh, &spaces.velocity, tag, 0, |_| [0.0, 0.0]).unwrap();
    }
    let s = laplace_system(&mesh, &spaces.velocity, vec![0.0; spaces.n_velocity()]);
    let x = solve_sparse(&s.apply_dirichlet(&c, false).unwrap()).unwrap();
    assert_eq!(max_abs(&x), 0.0);
}

#[test]
fn inflow_values_are_read_back_exactly() {
    let p = default_problem(COARSE);
    let fluid = p.fluid();
    let c = fluid.constraints(&fluid.inflow_bc(skewed(0.37))).unwrap();
    let s = SaddleSystem {
        matrix: fluid.stokes().clone(),
        rhs: vec![0.0; fluid.spaces().dim()],
        n_velocity: fluid.spaces().n_velocity(),
        n_pressure: fluid.spaces().n_pressure(),
    };
    let x = solve_sparse(&s.apply_dirichlet(&c, false).unwrap()).unwrap();
    let inflow = boundary_dofs(p.mesh(), &fluid.spaces().velocity, BoundaryTag::Inflow).unwrap();
    assert!(!inflow.is_empty());
    for d in inflow {
        assert_eq!(x[d], c.get(d).unwrap());
    }
}

#[test]
fn elimination_matches_lagrange_multipliers() {
    let p = default_problem(COARSE);
    let fluid = p.fluid();
    let c = fluid.constraints(&fluid.inflow_bc(parabolic(1.0))).unwrap();
    let load = assemble_rhs(p.mesh(), fluid.spaces(), Some(&|x| [x[1], 1.0]), None, None);
    let s = SaddleSystem {
        matrix: fluid.stokes().clone(),
        rhs: load.clone(),
        n_velocity: fluid.spaces().n_velocity(),
        n_pressure: fluid.spaces().n_pressure(),
    };
    let x = solve_sparse(&s.apply_dirichlet(&c, false).unwrap()).unwrap();
    // [[S, Cᵀ], [C, 0]] [x; λ] = [b; g]
    let (n, m) = (s.dim(), c.len());
    let mut big = DMatrix::zeros(n + m, n + m);
    big.view_mut((0, 0), (n, n)).copy_from(&dense(&s.matrix));
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from_slice(&load);
    for (r, (d, v)) in c.iter().enumerate() {
        big[(n + r, d)] = 1.0;
        big[(d, n + r)] = 1.0;
        rhs[n + r] = v;
    }
    let oracle = big.lu().solve(&rhs).unwrap();
    let gap = max_abs_diff(&x, &oracle.as_slice()[..n]) / max_abs(&x);
    assert!(gap < 1e-10, "{gap:e}");
}

#[test]
fn conflicting_prescriptions_are_rejected() {
    let mesh = default_mesh(COARSE);
    let space = FeSpace::new(&mesh, SpaceDescriptor::VELOCITY);
    let mut c = Constraints::new();
    c.prescribe_tag(&mesh, &space, BoundaryTag::Wall, 0, |_| [0.0, 0.0]).unwrap();
    let err = c.prescribe_tag(&mesh, &space, BoundaryTag::Wall, 0, |_| [1.0, 0.0]);
    assert!(matches!(err, Err(FemError::ConflictingDirichlet { .. })));
}

#[test]
fn identity_system_returns_rhs() {
    let rhs: Vec<f64> = (0..20).map(|i| (i as f64).sqrt() - 2.0).collect();
    let s = SaddleSystem { matrix: CsrMatrix::identity(20), rhs: rhs.clone(), n_velocity: 20, n_pressure: 0 };
    assert_eq!(solve_sparse(&s.apply_dirichlet(&Constraints::new(), false).unwrap()).unwrap(), rhs);
}

fn random_sparse(n: usize, seed: u64) -> CsrMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = TripletBuilder::new(n, n);
    for i in 0..n {
        b.push(i, i, 4.0 + rng.random_range(0.0..1.0));
        for _ in 0..4 {
            b.push(i, rng.random_range(0..n), rng.random_range(-0.5..0.5));
        }
    }
    b.build()
}

#[test]
fn random_sparse_system_matches_dense_lu() {
    let a = random_sparse(50, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let rhs: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
    let s = SaddleSystem { matrix: a.clone(), rhs: rhs.clone(), n_velocity: 50, n_pressure: 0 };
    let constrained = s.apply_dirichlet(&Constraints::new(), false).unwrap();
    let x = solve_sparse(&constrained).unwrap();
    let oracle = dense(&a).lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
    assert!(max_abs_diff(&x, oracle.as_slice()) < 1e-11);
    let r: Vec<f64> = a.mul_vec(&x).iter().zip(&rhs).map(|(u, v)| u - v).collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(norm(&r) / norm(&rhs) <= 1e-10);
    // same input, same bits
    assert_eq!(solve_sparse(&constrained).unwrap(), x);
}

#[test]
fn enclosed_flow_needs_a_pressure_pin() {
    let p = default_problem(COARSE);
    let fluid = p.fluid();
    let mesh = p.mesh();
    let mut c = Constraints::new();
    for tag in [BoundaryTag::Inflow, BoundaryTag::Wall, BoundaryTag::Outflow, BoundaryTag::Interface] {
        c.prescribe_tag(mesh, &fluid.spaces().velocity, tag, 0, |_| [0.0, 0.0]).unwrap();
    }
    let load = assemble_rhs(mesh, fluid.spaces(), Some(&|x| [x[1] - 0.5, x[0]]), None, None);
    let s = SaddleSystem {
        matrix: fluid.stokes().clone(),
        rhs: load,
        n_velocity: fluid.spaces().n_velocity(),
        n_pressure: fluid.spaces().n_pressure(),
    };
    let unpinned = solve_sparse(&s.apply_dirichlet(&c, false).unwrap());
    assert!(
        matches!(unpinned, Err(SolverError::ZeroPivot { .. } | SolverError::ResidualTooLarge { .. })),
        "{unpinned:?}"
    );
    let x = solve_sparse(&s.apply_dirichlet(&c, true).unwrap()).unwrap();
    assert_eq!(x[s.n_velocity], 0.0);
    assert!(max_abs(&x[..s.n_velocity]) > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn p1_element_laplacian_is_symmetric_with_zero_row_sums(
        v in proptest::array::uniform6(-2.0f64..2.0),
    ) {
        let verts = [[v[0], v[1]], [v[2], v[3]], [v[4], v[5]]];
        let area = 0.5 * ((verts[1][0] - verts[0][0]) * (verts[2][1] - verts[0][1])
            - (verts[2][0] - verts[0][0]) * (verts[1][1] - verts[0][1]));
        prop_assume!(area > 0.05);
        let el = Element::from_vertices(verts);
        let g = el.p1_grads();
        for i in 0..3 {
            let row: f64 = (0..3).map(|j| g[i][0] * g[j][0] + g[i][1] * g[j][1]).sum();
            prop_assert!(row.abs() < 1e-10 * (1.0 + g[i][0].abs() + g[i][1].abs()).powi(2));
        }
        prop_assert!((el.area - area).abs() < 1e-14);
    }

    #[test]
    fn p2_basis_is_a_partition_of_unity(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        prop_assume!(x + y <= 1.0);
        let sum: f64 = p2_values([x, y]).iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-14);
        let grad = p2_ref_grads([x, y]).iter().fold([0.0, 0.0], |a, g| [a[0] + g[0], a[1] + g[1]]);
        prop_assert!(grad[0].abs() < 1e-13 && grad[1].abs() < 1e-13);
    }

    #[test]
    fn cofactor_times_transpose_is_det_identity(m in proptest::array::uniform4(-3.0f64..3.0)) {
        let j = Mat2::new(m[0], m[1], m[2], m[3]);
        let prod = j * j.cofactor().transpose();
        prop_assert!((prod - Mat2::IDENTITY.scale(j.det())).max_abs() < 1e-13);
    }

    #[test]
    fn elimination_agrees_with_multipliers(seed in 0u64..1000, picks in proptest::collection::btree_set(0usize..12, 1..6)) {
        let n = 12;
        let a = random_sparse(n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut c = Constraints::new();
        for &d in &picks {
            c.set(d, rng.random_range(-1.0..1.0)).unwrap();
        }
        let x = FactoredSystem::new(&a, &c.dofs()).unwrap().solve(&b, &c).unwrap();
        let m = picks.len();
        let mut big = DMatrix::zeros(n + m, n + m);
        big.view_mut((0, 0), (n, n)).copy_from(&dense(&a));
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from_slice(&b);
        for (r, (d, v)) in c.iter().enumerate() {
            big[(n + r, d)] = 1.0;
            big[(d, n + r)] = 1.0;
            rhs[n + r] = v;
        }
        let oracle = big.lu().solve(&rhs).unwrap();
        prop_assert!(max_abs_diff(&x, &oracle.as_slice()[..n]) < 1e-10);
    }
}

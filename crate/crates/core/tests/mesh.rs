use channel_fsi::mesh::{
    build_channel_mesh, refine_uniform, validate, BoundaryTag, ChannelGeometry, Obstacle, Rect,
    Subdomain,
};
use proptest::prelude::*;

fn default_mesh(h: f64) -> channel_fsi::mesh::Mesh {
    build_channel_mesh(&ChannelGeometry::default().with_edge_length(h)).unwrap()
}

#[test]
fn inflow_edges_tile_the_left_side() {
    let m = default_mesh(0.1);
    let total: f64 = m.edges_with_tag(BoundaryTag::Inflow).map(|e| e.length).sum();
    assert!((total - 1.0).abs() < 1e-12, "inflow length {total}");
}

#[test]
fn default_mesh_is_valid_with_unit_euler_count() {
    let m = default_mesh(0.1);
    let r = validate(&m).unwrap();
    assert_eq!(r.euler_with_holes, 1);
    assert_eq!(r.boundary_loops, 2);
    assert_eq!(r.components, 1);
    assert!(r.max_edge_length <= 1.5 * 0.1);
    for tag in BoundaryTag::ALL {
        assert!(r.tag_counts[&tag] > 0, "{tag} missing");
    }
}

#[test]
fn validator_is_reproducible_and_matches_mesh_tags() {
    let m = default_mesh(0.15);
    let a = validate(&m).unwrap();
    let b = validate(&m).unwrap();
    assert_eq!(a, b);
    for tag in BoundaryTag::ALL {
        assert_eq!(a.tag_counts[&tag], m.edges_with_tag(tag).count());
    }
}

#[test]
fn areas_match_geometry() {
    let m = default_mesh(0.1);
    assert!((m.subdomain_area(Subdomain::Solid) - (0.16 - 0.04)).abs() < 1e-13);
    assert!((m.subdomain_area(Subdomain::Fluid) - (4.0 - 0.16)).abs() < 1e-12);
}

#[test]
fn touching_obstacle_is_rejected() {
    let g = ChannelGeometry {
        obstacle: Some(Obstacle {
            outer: Rect::new(1.0, 0.0, 1.4, 0.4),
            inner: Rect::new(1.1, 0.1, 1.3, 0.3),
        }),
        ..ChannelGeometry::default()
    };
    assert!(build_channel_mesh(&g).is_err());
}

#[test]
fn refinement_quadruples_triangles_and_keeps_validity() {
    let m = default_mesh(0.2);
    let r = refine_uniform(&m);
    assert_eq!(r.n_triangles(), 4 * m.n_triangles());
    assert_eq!(r.n_vertices(), m.n_vertices() + m.edges().len());
    let rep = validate(&r).unwrap();
    assert_eq!(rep.euler_with_holes, 1);
    let parent = validate(&m).unwrap();
    assert!((rep.fluid_area - parent.fluid_area).abs() < 1e-13);
    for tag in BoundaryTag::ALL {
        assert_eq!(rep.tag_counts[&tag], 2 * parent.tag_counts[&tag]);
    }
}

#[test]
fn default_mesh_is_mirror_symmetric() {
    let m = default_mesh(0.1);
    let perm = m.mirror_permutation().expect("symmetric mesh");
    assert_eq!(perm.len(), m.n_p2_nodes());
    for (i, &j) in perm.iter().enumerate() {
        let (p, q) = (m.p2_coord(i), m.p2_coord(j));
        assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] + q[1] - 1.0).abs() < 1e-12);
        assert_eq!(perm[j], i);
    }
}

#[test]
fn straight_channel_has_no_solid() {
    let m = build_channel_mesh(&ChannelGeometry::straight(2.0, 1.0, 0.25)).unwrap();
    let r = validate(&m).unwrap();
    assert_eq!(r.euler_with_holes, 1);
    assert_eq!(r.boundary_loops, 1);
    assert!(!m.has_tag(BoundaryTag::Interface));
    assert!(m.subdomains().iter().all(|&s| s == Subdomain::Fluid));
}

#[test]
fn boundary_normals_point_outward() {
    let m = default_mesh(0.2);
    for e in m.boundary_edges() {
        let n = e.normal;
        let expected = match e.tag {
            BoundaryTag::Inflow => Some([-1.0, 0.0]),
            BoundaryTag::Outflow => Some([1.0, 0.0]),
            _ => None,
        };
        if let Some(x) = expected {
            assert_eq!(n, x);
        }
        assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_geometries_validate(
        cx in 0.8f64..2.5, cy in 0.35f64..0.65, outer in 0.2f64..0.5,
        frac in 0.2f64..0.8, h in 0.08f64..0.3,
    ) {
        let outer = outer.min(2.0 * cy - 0.05).min(2.0 * (1.0 - cy) - 0.05);
        let g = ChannelGeometry {
            channel_length: 3.5,
            channel_height: 1.0,
            obstacle: Some(Obstacle {
                outer: Rect::centered(cx, cy, outer),
                inner: Rect::centered(cx, cy, frac * outer),
            }),
            target_edge_length: h,
        };
        let m = build_channel_mesh(&g).unwrap();
        let r = validate(&m).unwrap();
        prop_assert_eq!(r.euler_with_holes, 1);
        prop_assert!(r.max_edge_length <= 1.5 * h);
        let inflow: f64 = m.edges_with_tag(BoundaryTag::Inflow).map(|e| e.length).sum();
        prop_assert!((inflow - 1.0).abs() < 1e-12);
        let r2 = validate(&refine_uniform(&m)).unwrap();
        prop_assert_eq!(r2.euler_with_holes, 1);
    }
}

//! Independent half-edge validator. It rebuilds adjacency from the raw
//! triangle list and does not use the connectivity cached in [`Mesh`].

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use super::{BoundaryTag, Mesh, Subdomain};
use crate::error::MeshError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    /// `V - E + F` of the triangulation alone
    pub euler_characteristic: i64,
    pub boundary_loops: usize,
    pub components: usize,
    /// `V - E + F` with every hole counted as an extra face; 1 for a valid mesh
    pub euler_with_holes: i64,
    pub all_positively_oriented: bool,
    pub min_area: f64,
    pub tag_counts: BTreeMap<BoundaryTag, usize>,
    pub tag_lengths: BTreeMap<BoundaryTag, f64>,
    pub fluid_area: f64,
    pub solid_area: f64,
    pub max_edge_length: f64,
}

fn area(p: [[f64; 2]; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

pub fn validate(mesh: &Mesh) -> Result<ValidationReport, MeshError> {
    let nodes = mesh.nodes();
    let tris = mesh.triangles();
    let subs = mesh.subdomains();

    let mut min_area = f64::INFINITY;
    let mut fluid_area = 0.0;
    let mut solid_area = 0.0;
    for (t, tri) in tris.iter().enumerate() {
        let a = area([nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]]);
        if !(a > 0.0) {
            return Err(MeshError::Orientation(t));
        }
        min_area = min_area.min(a);
        match subs[t] {
            Subdomain::Fluid => fluid_area += a,
            Subdomain::Solid => solid_area += a,
        }
    }

    // half-edge (from, to) -> triangle; duplicates mean non-manifold or flipped
    let mut half: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * tris.len());
    for (t, tri) in tris.iter().enumerate() {
        for k in 0..3 {
            let he = (tri[k], tri[(k + 1) % 3]);
            if half.insert(he, t).is_some() {
                return Err(MeshError::Orientation(t));
            }
        }
    }

    let mut tag_of: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
    for be in mesh.boundary_edges() {
        let [a, b] = be.nodes;
        let k = (a.min(b), a.max(b));
        if tag_of.insert(k, be.tag).is_some() {
            return Err(MeshError::BadTag(a, b));
        }
    }

    let mut undirected: HashSet<(usize, usize)> = HashSet::new();
    let mut boundary_next: HashMap<usize, usize> = HashMap::new();
    let mut tag_counts: BTreeMap<BoundaryTag, usize> = BTreeMap::new();
    let mut tag_lengths: BTreeMap<BoundaryTag, f64> = BTreeMap::new();
    let mut max_edge_length = 0.0_f64;
    let (xmin, ymin, xmax, ymax) = mesh.bounding_box();
    let mut seen_tags = 0usize;
    let mut ordered: Vec<((usize, usize), usize)> = half.iter().map(|(&k, &t)| (k, t)).collect();
    ordered.sort_unstable();
    for &((a, b), t) in &ordered {
        let k = (a.min(b), a.max(b));
        let twin = half.get(&(b, a)).copied();
        let first_visit = undirected.insert(k);
        if first_visit {
            let (pa, pb) = (nodes[a], nodes[b]);
            max_edge_length =
                max_edge_length.max(((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt());
        }
        let expected: Option<BoundaryTag> = match twin {
            None => {
                if boundary_next.insert(a, b).is_some() {
                    // two boundary half-edges leave the same vertex
                    return Err(MeshError::Orientation(t));
                }
                let tag = *tag_of.get(&k).ok_or(MeshError::UntaggedBoundary(a, b))?;
                if !tag.is_adjacent_to(subs[t]) || tag == BoundaryTag::Interface {
                    return Err(MeshError::TagNotAdjacent {
                        tag,
                        subdomain: subs[t].to_string(),
                    });
                }
                let (pa, pb) = (nodes[a], nodes[b]);
                let snapped = match tag {
                    BoundaryTag::Inflow => pa[0] == xmin && pb[0] == xmin,
                    BoundaryTag::Outflow => pa[0] == xmax && pb[0] == xmax,
                    BoundaryTag::Wall => {
                        (pa[1] == ymin && pb[1] == ymin) || (pa[1] == ymax && pb[1] == ymax)
                    }
                    _ => true,
                };
                if !snapped {
                    return Err(MeshError::BadTag(a, b));
                }
                Some(tag)
            }
            Some(s) if subs[s] != subs[t] => {
                if !first_visit {
                    continue;
                }
                match tag_of.get(&k) {
                    Some(BoundaryTag::Interface) => Some(BoundaryTag::Interface),
                    _ => return Err(MeshError::NonConformingInterface(a, b)),
                }
            }
            Some(_) => {
                if tag_of.contains_key(&k) {
                    return Err(MeshError::BadTag(a, b));
                }
                None
            }
        };
        if let Some(tag) = expected {
            seen_tags += 1;
            *tag_counts.entry(tag).or_default() += 1;
            let (pa, pb) = (nodes[a], nodes[b]);
            *tag_lengths.entry(tag).or_default() +=
                ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        }
    }
    if seen_tags != tag_of.len() {
        // some tag sits on an edge that is neither boundary nor interface
        let (&(a, b), _) = tag_of
            .iter()
            .find(|(k, _)| !undirected.contains(k))
            .unwrap_or((&(0, 0), &BoundaryTag::Wall));
        return Err(MeshError::BadTag(a, b));
    }

    // walk boundary loops
    let mut visited: HashSet<usize> = HashSet::new();
    let mut loops = 0usize;
    let mut starts: Vec<usize> = boundary_next.keys().copied().collect();
    starts.sort_unstable();
    for s in starts {
        if visited.contains(&s) {
            continue;
        }
        loops += 1;
        let mut v = s;
        while visited.insert(v) {
            v = boundary_next[&v];
        }
    }

    let components = count_components(nodes.len(), tris);
    let v = nodes.len() as i64;
    let e = undirected.len() as i64;
    let f = tris.len() as i64;
    let chi = v - e + f;
    let holes = loops as i64 - components as i64;
    Ok(ValidationReport {
        vertices: nodes.len(),
        edges: undirected.len(),
        triangles: tris.len(),
        euler_characteristic: chi,
        boundary_loops: loops,
        components,
        euler_with_holes: chi + holes,
        all_positively_oriented: true,
        min_area,
        tag_counts,
        tag_lengths,
        fluid_area,
        solid_area,
        max_edge_length,
    })
}

fn count_components(n: usize, tris: &[[usize; 3]]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut used = vec![false; n];
    for tri in tris {
        for k in 0..3 {
            used[tri[k]] = true;
            let (a, b) = (find(&mut parent, tri[k]), find(&mut parent, tri[(k + 1) % 3]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    (0..n).filter(|&i| used[i] && find(&mut parent, i) == i).count()
}

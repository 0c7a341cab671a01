use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{BoundaryTag, Mesh, Subdomain};
use crate::error::{GeometryError, MeshError};

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn centered(cx: f64, cy: f64, side: f64) -> Self {
        let r = 0.5 * side;
        Self::new(cx - r, cy - r, cx + r, cy + r)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] > self.x0 && p[0] < self.x1 && p[1] > self.y0 && p[1] < self.y1
    }

    fn validate(&self) -> Result<(), GeometryError> {
        let ok = [self.x0, self.y0, self.x1, self.y1]
            .iter()
            .all(|v| v.is_finite());
        if !ok || self.x1 <= self.x0 || self.y1 <= self.y0 {
            return Err(GeometryError::DegenerateRect(format!("{self:?}")));
        }
        Ok(())
    }
}

/// The elastic annulus: region between `outer` and `inner`; the inner
/// rectangle is a hole whose boundary is clamped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub outer: Rect,
    pub inner: Rect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelGeometry {
    pub channel_length: f64,
    pub channel_height: f64,
    /// `None` gives the straight channel without a solid.
    pub obstacle: Option<Obstacle>,
    pub target_edge_length: f64,
}

impl Default for ChannelGeometry {
    fn default() -> Self {
        Self {
            channel_length: 4.0,
            channel_height: 1.0,
            obstacle: Some(Obstacle {
                outer: Rect::centered(1.2, 0.5, 0.4),
                inner: Rect::centered(1.2, 0.5, 0.2),
            }),
            target_edge_length: 0.1,
        }
    }
}

impl ChannelGeometry {
    pub fn straight(length: f64, height: f64, target_edge_length: f64) -> Self {
        Self {
            channel_length: length,
            channel_height: height,
            obstacle: None,
            target_edge_length,
        }
    }

    pub fn with_edge_length(mut self, h: f64) -> Self {
        self.target_edge_length = h;
        self
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let (l, hh) = (self.channel_length, self.channel_height);
        if !(l.is_finite() && hh.is_finite() && l > 0.0 && hh > 0.0) {
            return Err(GeometryError::BadChannel {
                length: l,
                height: hh,
            });
        }
        let h = self.target_edge_length;
        if !(h.is_finite() && h > 0.0) {
            return Err(GeometryError::NonPositiveEdgeLength(h));
        }
        if let Some(obs) = &self.obstacle {
            obs.outer.validate()?;
            obs.inner.validate()?;
            let o = &obs.outer;
            let checks = [
                ("left", o.x0 > 0.0),
                ("right", o.x1 < l),
                ("bottom", o.y0 > 0.0),
                ("top", o.y1 < hh),
            ];
            if let Some((side, _)) = checks.iter().find(|(_, ok)| !ok) {
                return Err(GeometryError::ObstacleClearance { side });
            }
            let i = &obs.inner;
            let checks = [
                ("left", i.x0 > o.x0),
                ("right", i.x1 < o.x1),
                ("bottom", i.y0 > o.y0),
                ("top", i.y1 < o.y1),
            ];
            if let Some((side, _)) = checks.iter().find(|(_, ok)| !ok) {
                return Err(GeometryError::InnerNotContained { side });
            }
        }
        Ok(())
    }
}

/// Graded 1D subdivision: breakpoints are kept exactly and each interval is
/// split so that the local spacing follows `min(h, h/2 + 0.2 d)`, with `d`
/// the distance to `[lo, hi]` (the obstacle's extent along this axis).
fn graded_axis(breaks: &[f64], h: f64, focus: Option<(f64, f64)>) -> Vec<f64> {
    let spacing = |x: f64| match focus {
        Some((lo, hi)) => {
            let d = if x < lo {
                lo - x
            } else if x > hi {
                x - hi
            } else {
                0.0
            };
            h.min(0.5 * h + 0.2 * d)
        }
        None => h,
    };
    const SAMPLES: usize = 256;
    let mut out = vec![breaks[0]];
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        // cumulative ∫ 1/s by the midpoint rule
        let dx = (b - a) / SAMPLES as f64;
        let mut cum = Vec::with_capacity(SAMPLES + 1);
        cum.push(0.0);
        for k in 0..SAMPLES {
            let x = a + (k as f64 + 0.5) * dx;
            cum.push(cum[k] + dx / spacing(x));
        }
        let total = cum[SAMPLES];
        let n = (total - 1e-9).ceil().max(1.0) as usize;
        for m in 1..n {
            let target = total * m as f64 / n as f64;
            let k = cum.partition_point(|&c| c < target).clamp(1, SAMPLES);
            let frac = (target - cum[k - 1]) / (cum[k] - cum[k - 1]);
            out.push(a + (k as f64 - 1.0 + frac) * dx);
        }
        out.push(b);
    }
    out
}

fn sorted_breaks(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Structured, graded triangulation of the channel with the obstacle
/// annulus. Cells inside the inner rectangle are left unmeshed.
pub fn build_channel_mesh(geom: &ChannelGeometry) -> Result<Mesh, MeshError> {
    geom.validate()?;
    let (l, hh, h) = (
        geom.channel_length,
        geom.channel_height,
        geom.target_edge_length,
    );
    let mid = 0.5 * hh;
    let mut xb = vec![0.0, l];
    let mut yb = vec![0.0, mid, hh];
    let mut xfocus = None;
    let mut yfocus = None;
    if let Some(obs) = &geom.obstacle {
        xb.extend([obs.outer.x0, obs.inner.x0, obs.inner.x1, obs.outer.x1]);
        yb.extend([obs.outer.y0, obs.inner.y0, obs.inner.y1, obs.outer.y1]);
        xfocus = Some((obs.outer.x0, obs.outer.x1));
        yfocus = Some((obs.outer.y0, obs.outer.y1));
    }
    let xs = graded_axis(&sorted_breaks(xb), h, xfocus);
    let ys = graded_axis(&sorted_breaks(yb), h, yfocus);
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    // first row index in the upper half
    let j_mid = ys.iter().position(|&y| y == mid).expect("mid-line breakpoint");

    let classify = |i: usize, j: usize| -> Option<Subdomain> {
        let c = [0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])];
        match &geom.obstacle {
            Some(obs) if obs.inner.contains(c) => None,
            Some(obs) if obs.outer.contains(c) => Some(Subdomain::Solid),
            _ => Some(Subdomain::Fluid),
        }
    };

    let mut node_id: HashMap<(usize, usize), usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut id = |i: usize, j: usize, nodes: &mut Vec<[f64; 2]>| -> usize {
        *node_id.entry((i, j)).or_insert_with(|| {
            nodes.push([xs[i], ys[j]]);
            nodes.len() - 1
        })
    };
    let mut triangles = Vec::new();
    let mut subdomains = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let Some(sub) = classify(i, j) else { continue };
            let n00 = id(i, j, &mut nodes);
            let n10 = id(i + 1, j, &mut nodes);
            let n11 = id(i + 1, j + 1, &mut nodes);
            let n01 = id(i, j + 1, &mut nodes);
            // alternate diagonals, reflected across the mid-line
            let rising = if j < j_mid {
                (i + j) % 2 == 0
            } else {
                (i + (ny - 1 - j)) % 2 == 1
            };
            if rising {
                triangles.push([n00, n10, n11]);
                triangles.push([n00, n11, n01]);
            } else {
                triangles.push([n00, n10, n01]);
                triangles.push([n10, n11, n01]);
            }
            subdomains.extend([sub, sub]);
        }
    }

    let tagged = tag_edges(&nodes, &triangles, &subdomains, l, hh);
    Mesh::from_parts(nodes, triangles, subdomains, tagged)
}

fn tag_edges(
    nodes: &[[f64; 2]],
    triangles: &[[usize; 3]],
    subdomains: &[Subdomain],
    l: f64,
    hh: f64,
) -> Vec<([usize; 2], BoundaryTag)> {
    // directed edge -> owning triangle
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            owner.insert((tri[k], tri[(k + 1) % 3]), t);
        }
    }
    let mut tagged = Vec::new();
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let (pa, pb) = (nodes[a], nodes[b]);
            match owner.get(&(b, a)) {
                None => {
                    let tag = if pa[0] == 0.0 && pb[0] == 0.0 {
                        BoundaryTag::Inflow
                    } else if pa[0] == l && pb[0] == l {
                        BoundaryTag::Outflow
                    } else if (pa[1] == 0.0 && pb[1] == 0.0) || (pa[1] == hh && pb[1] == hh) {
                        BoundaryTag::Wall
                    } else {
                        BoundaryTag::Clamped
                    };
                    tagged.push(([a, b], tag));
                }
                Some(&s) => {
                    if subdomains[t] == Subdomain::Fluid && subdomains[s] == Subdomain::Solid {
                        tagged.push(([a, b], BoundaryTag::Interface));
                    }
                }
            }
        }
    }
    tagged
}

/// Red refinement: every triangle split into four through its edge
/// midpoints. Tags and subdomain labels are inherited.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    let nv = mesh.n_vertices();
    let nodes: Vec<[f64; 2]> = (0..mesh.n_p2_nodes()).map(|n| mesh.p2_coord(n)).collect();
    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    let mut subdomains = Vec::with_capacity(4 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let [a, b, c, ab, bc, ca] = mesh.p2_nodes(t);
        triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        subdomains.extend([mesh.subdomains()[t]; 4]);
    }
    let mut tagged = Vec::with_capacity(2 * mesh.boundary_edges().len());
    for be in mesh.boundary_edges() {
        let m = nv + be.edge;
        tagged.push(([be.nodes[0], m], be.tag));
        tagged.push(([m, be.nodes[1]], be.tag));
    }
    Mesh::from_parts(nodes, triangles, subdomains, tagged)
        .expect("refinement of a valid mesh is valid")
}

//! Line-oriented mesh text format and legacy VTK export.
//!
//! ```text
//! channel-fsi-mesh 1
//! vertices <n>
//! <x> <y>
//! triangles <m>
//! <a> <b> <c> <fluid|solid>
//! edges <k>
//! <a> <b> <tag>
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;

use super::{BoundaryTag, Mesh, Subdomain};
use crate::error::MeshError;

const MAGIC: &str = "channel-fsi-mesh 1";

pub fn to_text(mesh: &Mesh) -> String {
    let mut s = String::new();
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "vertices {}", mesh.n_vertices()).unwrap();
    for p in mesh.nodes() {
        writeln!(s, "{:.17e} {:.17e}", p[0], p[1]).unwrap();
    }
    writeln!(s, "triangles {}", mesh.n_triangles()).unwrap();
    for (tri, sub) in mesh.triangles().iter().zip(mesh.subdomains()) {
        writeln!(s, "{} {} {} {}", tri[0], tri[1], tri[2], sub).unwrap();
    }
    writeln!(s, "edges {}", mesh.boundary_edges().len()).unwrap();
    for be in mesh.boundary_edges() {
        writeln!(s, "{} {} {}", be.nodes[0], be.nodes[1], be.tag).unwrap();
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>), MeshError> {
        loop {
            match self.inner.next() {
                Some((_, l)) if l.trim().is_empty() || l.starts_with('#') => continue,
                Some((i, l)) => return Ok((i + 1, l.split_whitespace().collect())),
                None => {
                    return Err(MeshError::Parse {
                        line: 0,
                        msg: "unexpected end of file".into(),
                    })
                }
            }
        }
    }

    fn header(&mut self, name: &str) -> Result<usize, MeshError> {
        let (line, f) = self.next()?;
        match f.as_slice() {
            [n, count] if *n == name => count.parse().map_err(|_| MeshError::Parse {
                line,
                msg: format!("bad {name} count"),
            }),
            _ => Err(MeshError::Parse {
                line,
                msg: format!("expected `{name} <count>`"),
            }),
        }
    }
}

fn parse<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, MeshError> {
    s.parse().map_err(|_| MeshError::Parse {
        line,
        msg: format!("cannot parse `{s}`"),
    })
}

pub fn from_text(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (line, magic) = lines.next()?;
    if magic.join(" ") != MAGIC {
        return Err(MeshError::Parse {
            line,
            msg: "missing header".into(),
        });
    }
    let nv = lines.header("vertices")?;
    let mut nodes = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, f) = lines.next()?;
        if f.len() != 2 {
            return Err(MeshError::Parse {
                line,
                msg: "expected `x y`".into(),
            });
        }
        nodes.push([parse(line, f[0])?, parse(line, f[1])?]);
    }
    let nt = lines.header("triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    let mut subdomains = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, f) = lines.next()?;
        if f.len() != 4 {
            return Err(MeshError::Parse {
                line,
                msg: "expected `a b c subdomain`".into(),
            });
        }
        let tri: [usize; 3] = [parse(line, f[0])?, parse(line, f[1])?, parse(line, f[2])?];
        if tri.iter().any(|&v| v >= nv) {
            return Err(MeshError::Parse {
                line,
                msg: "vertex index out of range".into(),
            });
        }
        let sub = match f[3] {
            "fluid" => Subdomain::Fluid,
            "solid" => Subdomain::Solid,
            other => {
                return Err(MeshError::Parse {
                    line,
                    msg: format!("unknown subdomain `{other}`"),
                })
            }
        };
        triangles.push(tri);
        subdomains.push(sub);
    }
    let ne = lines.header("edges")?;
    let mut tagged = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (line, f) = lines.next()?;
        if f.len() != 3 {
            return Err(MeshError::Parse {
                line,
                msg: "expected `a b tag`".into(),
            });
        }
        let tag = BoundaryTag::from_name(f[2]).ok_or_else(|| MeshError::Parse {
            line,
            msg: format!("unknown tag `{}`", f[2]),
        })?;
        tagged.push(([parse(line, f[0])?, parse(line, f[1])?], tag));
    }
    Mesh::from_parts(nodes, triangles, subdomains, tagged)
}

/// Nodal data on the P2 node set for VTK export.
pub enum PointData<'a> {
    Scalar(&'a str, &'a [f64]),
    Vector(&'a str, &'a [[f64; 2]]),
}

/// Legacy ASCII VTK with 6-node quadratic triangles over the P2 node set.
/// `cells` restricts output to the listed triangles (e.g. only fluid ones).
pub fn to_vtk(mesh: &Mesh, cells: &[usize], data: &[PointData<'_>]) -> String {
    let np = mesh.n_p2_nodes();
    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0\nchannel-fsi\nASCII\nDATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {np} double").unwrap();
    for n in 0..np {
        let p = mesh.p2_coord(n);
        writeln!(s, "{:.17e} {:.17e} 0", p[0], p[1]).unwrap();
    }
    writeln!(s, "CELLS {} {}", cells.len(), 7 * cells.len()).unwrap();
    for &t in cells {
        let n = mesh.p2_nodes(t);
        writeln!(s, "6 {} {} {} {} {} {}", n[0], n[1], n[2], n[3], n[4], n[5]).unwrap();
    }
    writeln!(s, "CELL_TYPES {}", cells.len()).unwrap();
    for _ in cells {
        writeln!(s, "22").unwrap();
    }
    writeln!(s, "CELL_DATA {}", cells.len()).unwrap();
    writeln!(s, "SCALARS subdomain int 1\nLOOKUP_TABLE default").unwrap();
    for &t in cells {
        let v = match mesh.subdomains()[t] {
            Subdomain::Fluid => 0,
            Subdomain::Solid => 1,
        };
        writeln!(s, "{v}").unwrap();
    }
    if !data.is_empty() {
        writeln!(s, "POINT_DATA {np}").unwrap();
    }
    for d in data {
        match d {
            PointData::Scalar(name, v) => {
                assert_eq!(v.len(), np);
                writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
                for x in v.iter() {
                    writeln!(s, "{x:.17e}").unwrap();
                }
            }
            PointData::Vector(name, v) => {
                assert_eq!(v.len(), np);
                writeln!(s, "VECTORS {name} double").unwrap();
                for x in v.iter() {
                    writeln!(s, "{:.17e} {:.17e} 0", x[0], x[1]).unwrap();
                }
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_channel_mesh, ChannelGeometry};

    #[test]
    fn text_round_trip_is_exact() {
        let m = build_channel_mesh(&ChannelGeometry::default().with_edge_length(0.2)).unwrap();
        let back = from_text(&to_text(&m)).unwrap();
        assert_eq!(back.nodes(), m.nodes());
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.boundary_edges(), m.boundary_edges());
    }

    #[test]
    fn comment_lines_are_skipped() {
        let m = build_channel_mesh(&ChannelGeometry::default().with_edge_length(0.3)).unwrap();
        let text = format!("# provenance\n{}", to_text(&m));
        assert_eq!(from_text(&text).unwrap().nodes(), m.nodes());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = from_text("channel-fsi-mesh 1\nvertices 1\n0.0 zero\n").unwrap_err();
        assert!(matches!(err, MeshError::Parse { line: 3, .. }));
    }
}

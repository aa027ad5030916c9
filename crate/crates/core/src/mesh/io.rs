//! Plain-text mesh files:
//!
//! ```text
//! nv nt nb
//! x y            (nv lines)
//! v0 v1 v2       (nt lines)
//! v0 v1 label    (nb lines; 1 inlet, 2 wall, 3 outlet, 4 interface)
//! ```
//!
//! Indices are 0-based and coordinates are written with `%.17g`.

use std::io::{BufRead, Write};

use super::{BoundaryEdge, TriMesh};
use crate::error::{Error, Result};
use crate::format::format_g17;
use crate::geometry::BoundaryLabel;
use crate::point::Vec2;
use crate::scalar::Real;

pub fn write_mesh<T: Real, W: Write>(mesh: &TriMesh<T>, mut out: W) -> Result<()> {
    writeln!(
        out,
        "{} {} {}",
        mesh.n_vertices(),
        mesh.n_triangles(),
        mesh.boundary_edges().len()
    )?;
    for v in mesh.vertices() {
        writeln!(out, "{} {}", format_g17(v.x.as_f64()), format_g17(v.y.as_f64()))?;
    }
    for t in mesh.triangles() {
        writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
    }
    for b in mesh.boundary_edges() {
        writeln!(out, "{} {} {}", b.vertices[0], b.vertices[1], b.label.code())?;
    }
    Ok(())
}

pub fn read_mesh<T: Real, R: BufRead>(input: R) -> Result<TriMesh<T>> {
    let mut lines = input.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let mut next = |what: &str| -> Result<(usize, Vec<String>)> {
        let (no, line) = lines.next().ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("unexpected end of file while reading {what}"),
        })?;
        Ok((no, line?.split_whitespace().map(str::to_owned).collect()))
    };
    fn field<V: std::str::FromStr>(line: usize, tok: &[String], i: usize, n: usize) -> Result<V> {
        if tok.len() != n {
            return Err(Error::Parse {
                line,
                message: format!("expected {n} fields, found {}", tok.len()),
            });
        }
        tok[i].parse().map_err(|_| Error::Parse {
            line,
            message: format!("cannot parse field {} ({:?})", i + 1, tok[i]),
        })
    }

    let (no, head) = next("the header")?;
    let nv: usize = field(no, &head, 0, 3)?;
    let nt: usize = field(no, &head, 1, 3)?;
    let nb: usize = field(no, &head, 2, 3)?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (no, tok) = next("vertices")?;
        let x: f64 = field(no, &tok, 0, 2)?;
        let y: f64 = field(no, &tok, 1, 2)?;
        vertices.push(Vec2::new(T::lit(x), T::lit(y)));
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (no, tok) = next("triangles")?;
        triangles.push([field(no, &tok, 0, 3)?, field(no, &tok, 1, 3)?, field(no, &tok, 2, 3)?]);
    }
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (no, tok) = next("boundary edges")?;
        let code: u8 = field(no, &tok, 2, 3)?;
        let label = BoundaryLabel::from_code(code).ok_or_else(|| Error::Parse {
            line: no,
            message: format!("unknown boundary label {code}"),
        })?;
        boundary.push(BoundaryEdge {
            vertices: [field(no, &tok, 0, 3)?, field(no, &tok, 1, 3)?],
            label,
        });
    }
    if let Some((no, _)) = lines.next() {
        return Err(Error::Parse {
            line: no,
            message: "trailing data".into(),
        });
    }
    TriMesh::new(vertices, triangles, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ChannelGeometry, InterfaceConfig};
    use crate::mesh::triangulate;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = ChannelGeometry::<f64>::benchmark();
        let i = InterfaceConfig::new(&g, 4.6 - 0.3).unwrap();
        let m = triangulate(&g.fe_polygon(Some(&i)), 0.07).unwrap();
        let mut buf = Vec::new();
        write_mesh(&m, &mut buf).unwrap();
        let back: TriMesh<f64> = read_mesh(buf.as_slice()).unwrap();
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.boundary_edges(), m.boundary_edges());
        for (a, b) in back.vertices().iter().zip(m.vertices()) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
        let mut again = Vec::new();
        write_mesh(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn parse_errors_report_line() {
        let text = "3 1 3\n0 0\n1 0\n0 x\n0 1 2\n0 1 2\n1 2 2\n2 0 2\n";
        match read_mesh::<f64, _>(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let text = "3 1 3\n0 0\n1 0\n0 1\n0 1 2\n0 1 2\n1 2 9\n2 0 2\n";
        assert!(matches!(
            read_mesh::<f64, _>(text.as_bytes()),
            Err(Error::Parse { line: 7, .. })
        ));
        let text = "3 1 3\n0 0\n1 0\n0 1\n0 1 2\n0 1 2\n1 2 2\n";
        assert!(read_mesh::<f64, _>(text.as_bytes()).is_err());
    }
}

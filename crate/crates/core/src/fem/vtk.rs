//! Legacy ASCII VTK output (unstructured grid of the mesh triangles).

use std::io::Write;

use crate::error::{Error, Result};
use crate::format::format_g17;
use crate::mesh::TriMesh;
use crate::scalar::Real;

/// Writes the mesh with named per-vertex and per-triangle scalars.
pub fn write_vtk<T: Real, W: Write>(
    mesh: &TriMesh<T>,
    point_data: &[(&str, &[T])],
    cell_data: &[(&str, &[T])],
    mut out: W,
) -> Result<()> {
    let nv = mesh.n_vertices();
    let nt = mesh.n_triangles();
    for (name, values) in point_data {
        if values.len() != nv {
            return Err(Error::InvalidParameter(format!(
                "point data {name:?} has {} values for {nv} vertices",
                values.len()
            )));
        }
    }
    for (name, values) in cell_data {
        if values.len() != nt {
            return Err(Error::InvalidParameter(format!(
                "cell data {name:?} has {} values for {nt} triangles",
                values.len()
            )));
        }
    }
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "serp output")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {nv} double")?;
    for v in mesh.vertices() {
        writeln!(out, "{} {} 0", format_g17(v.x.as_f64()), format_g17(v.y.as_f64()))?;
    }
    writeln!(out, "CELLS {nt} {}", 4 * nt)?;
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(out, "5")?;
    }
    let section = |kind: &str, n: usize, data: &[(&str, &[T])], out: &mut W| -> Result<()> {
        if data.is_empty() {
            return Ok(());
        }
        writeln!(out, "{kind} {n}")?;
        for (name, values) in data {
            writeln!(out, "SCALARS {} double 1", name.replace(char::is_whitespace, "_"))?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for v in values.iter() {
                writeln!(out, "{}", format_g17(v.as_f64()))?;
            }
        }
        Ok(())
    };
    section("POINT_DATA", nv, point_data, &mut out)?;
    section("CELL_DATA", nt, cell_data, &mut out)?;
    Ok(())
}

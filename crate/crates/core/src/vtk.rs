//! Legacy ASCII VTK output of DG fields and RT0 fluxes.

use std::io::{self, Write};

use crate::dg::DGFunction;
use crate::mesh::Mesh;
use crate::rt0::RT0Function;

const VTK_TRIANGLE: u8 = 5;

fn header<W: Write>(w: &mut W, title: &str) -> io::Result<()> {
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")
}

fn cells<W: Write>(w: &mut W, triangles: impl ExactSizeIterator<Item = [usize; 3]>) -> io::Result<()> {
    let count = triangles.len();
    writeln!(w, "CELLS {count} {}", 4 * count)?;
    for [a, b, c] in triangles {
        writeln!(w, "3 {a} {b} {c}")?;
    }
    writeln!(w, "CELL_TYPES {count}")?;
    for _ in 0..count {
        writeln!(w, "{VTK_TRIANGLE}")?;
    }
    Ok(())
}

fn scalars<W: Write>(w: &mut W, name: &str, values: &[f64]) -> io::Result<()> {
    writeln!(w, "SCALARS {name} double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in values {
        writeln!(w, "{v:.17e}")?;
    }
    Ok(())
}

/// Writes the mesh alone.
pub fn write_mesh<W: Write>(mut w: W, mesh: &Mesh, title: &str) -> io::Result<()> {
    header(&mut w, title)?;
    writeln!(w, "POINTS {} double", mesh.num_vertices())?;
    for p in mesh.vertices() {
        writeln!(w, "{:.17e} {:.17e} 0", p[0], p[1])?;
    }
    cells(&mut w, mesh.elements().iter().copied())
}

/// Writes a discontinuous P1 field with element-wise duplicated corners, so
/// the jumps are visible, plus the element means as cell data.
pub fn write_dg<W: Write>(mut w: W, field: &DGFunction, name: &str, title: &str) -> io::Result<()> {
    let mesh = field.mesh();
    let t = mesh.num_elements();
    header(&mut w, title)?;
    writeln!(w, "POINTS {} double", 3 * t)?;
    for k in 0..t {
        for p in mesh.element_points(k) {
            writeln!(w, "{:.17e} {:.17e} 0", p[0], p[1])?;
        }
    }
    cells(&mut w, (0..t).map(|k| [3 * k, 3 * k + 1, 3 * k + 2]))?;
    writeln!(w, "POINT_DATA {}", 3 * t)?;
    scalars(&mut w, name, field.coefficients())?;
    writeln!(w, "CELL_DATA {t}")?;
    scalars(&mut w, &format!("{name}_mean"), &field.cell_means())
}

/// Writes an RT0 flux as barycenter vectors and element-averaged divergence.
pub fn write_flux<W: Write>(mut w: W, flux: &RT0Function, name: &str, title: &str) -> io::Result<()> {
    let mesh = flux.mesh();
    write_mesh(&mut w, mesh, title)?;
    let t = mesh.num_elements();
    writeln!(w, "CELL_DATA {t}")?;
    writeln!(w, "VECTORS {name} double")?;
    for v in flux.barycenter_values() {
        writeln!(w, "{:.17e} {:.17e} 0", v[0], v[1])?;
    }
    let div: Vec<f64> = flux
        .cell_divergence_integrals()
        .iter()
        .enumerate()
        .map(|(k, d)| d / mesh.area(k))
        .collect();
    scalars(&mut w, &format!("{name}_divergence"), &div)
}

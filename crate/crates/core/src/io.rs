//! Field export: legacy-VTK ASCII and 8-bit PGM.
//!
//! VTK output uses the `STRUCTURED_POINTS` dataset with one `SCALARS` block
//! per field channel; cell data is written full precision, so VTK files are
//! lossless snapshots. PGM output linearly maps `[min, max]` to `[0, 255]`
//! per channel (lossy by construction) and records the scale in the comment
//! line.

use crate::field::{CellField, Mesh, NodalField};
use crate::Result;
use std::io::Write;
use std::path::Path;

/// Write cell fields (and optionally nodal fields) into one legacy-VTK
/// ASCII `STRUCTURED_POINTS` container. Multi-channel fields become one
/// `SCALARS` block per channel, named `<name>_<channel>`.
pub fn write_vtk(
    path: &Path,
    title: &str,
    mesh: Mesh,
    cell_fields: &[(&str, &CellField)],
    nodal_fields: &[(&str, &NodalField)],
) -> Result<()> {
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str(title);
    out.push('\n');
    out.push_str("ASCII\nDATASET STRUCTURED_POINTS\n");
    out.push_str(&format!(
        "DIMENSIONS {} {} 1\n",
        mesh.nx() + 1,
        mesh.ny() + 1
    ));
    out.push_str("ORIGIN 0 0 0\n");
    out.push_str(&format!("SPACING {:.17e} {:.17e} 1\n", mesh.hx(), mesh.hy()));

    if !cell_fields.is_empty() {
        out.push_str(&format!("CELL_DATA {}\n", mesh.num_cells()));
        for (name, field) in cell_fields {
            for c in 0..field.channels() {
                let block = if field.channels() == 1 {
                    name.to_string()
                } else {
                    format!("{name}_{c}")
                };
                out.push_str(&format!("SCALARS {block} double 1\nLOOKUP_TABLE default\n"));
                for e in 0..mesh.num_cells() {
                    out.push_str(&format!("{:.17e}\n", field.cell(e)[c]));
                }
            }
        }
    }
    if !nodal_fields.is_empty() {
        out.push_str(&format!("POINT_DATA {}\n", mesh.num_nodes()));
        for (name, field) in nodal_fields {
            for c in 0..field.channels() {
                let block = if field.channels() == 1 {
                    name.to_string()
                } else {
                    format!("{name}_{c}")
                };
                out.push_str(&format!("SCALARS {block} double 1\nLOOKUP_TABLE default\n"));
                for a in 0..mesh.num_nodes() {
                    out.push_str(&format!("{:.17e}\n", field.node(a)[c]));
                }
            }
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Write one channel of a cell field as ASCII PGM (P2). Rows run top to
/// bottom so the image has the usual orientation; the linear scale is
/// recorded in the comment line.
pub fn write_pgm(path: &Path, field: &CellField, channel: usize) -> Result<()> {
    let mesh = field.mesh();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for e in 0..mesh.num_cells() {
        let v = field.cell(e)[channel];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    let mut out = String::new();
    out.push_str("P2\n");
    out.push_str(&format!("# channel {channel} min {lo:.17e} max {hi:.17e}\n"));
    out.push_str(&format!("{} {}\n255\n", mesh.nx(), mesh.ny()));
    for j in (0..mesh.ny()).rev() {
        for i in 0..mesh.nx() {
            let v = field.cell(mesh.cell_index(i, j))[channel];
            let g = if span > 0.0 {
                ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            };
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&g.to_string());
        }
        out.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn vtk_container_has_expected_blocks() {
        let dir = tempdir().unwrap();
        let mesh = Mesh::new(2.0, 1.0, 2, 1).unwrap();
        let cells = CellField::from_values(mesh, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut nodes = NodalField::zeros(mesh, 1);
        for (a, v) in nodes.values_mut().iter_mut().enumerate() {
            *v = a as f64;
        }
        let path = dir.path().join("f.vtk");
        write_vtk(&path, "fields", mesh, &[("eta", &cells)], &[("u", &nodes)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("DATASET STRUCTURED_POINTS"));
        assert!(text.contains("DIMENSIONS 3 2 1"));
        assert!(text.contains("CELL_DATA 2"));
        assert!(text.contains("SCALARS eta_0 double 1"));
        assert!(text.contains("SCALARS eta_1 double 1"));
        assert!(text.contains("POINT_DATA 6"));
        assert!(text.contains("SCALARS u double 1"));
        // Full-precision roundtrip of a cell value.
        assert!(text.contains(&format!("{:.17e}", 3.0)));
    }

    #[test]
    fn pgm_scale_and_orientation() {
        let dir = tempdir().unwrap();
        let mesh = Mesh::new(2.0, 2.0, 2, 2).unwrap();
        // Bottom row 0, top row 1: image top line must show the top cells.
        let cells =
            CellField::from_values(mesh, 1, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let path = dir.path().join("f.pgm");
        write_pgm(&path, &cells, 0).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "P2");
        assert!(lines[1].contains("min") && lines[1].contains("max"));
        assert_eq!(lines[2], "2 2");
        assert_eq!(lines[3], "255");
        assert_eq!(lines[4], "255 255");
        assert_eq!(lines[5], "0 0");
    }
}

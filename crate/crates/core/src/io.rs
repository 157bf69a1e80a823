//! File output and exchange formats: atomic writes, legacy VTK export for
//! visualization, and the line network ASCII format.

use std::fmt::Write as _;
use std::path::Path;

use crate::geometry::{IntensityProfile, LineNetwork, Point3, Segment};
use crate::mesh::{ElementKind, Mesh};
use crate::{Error, Result};

/// Writes `bytes` to `path` via a temporary file in the same directory and
/// an atomic rename, so readers never observe a partially written file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let stem = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let tmp_name = format!(
        ".{}.tmp.{}",
        stem.to_string_lossy(),
        std::process::id()
    );
    let tmp = match dir {
        Some(d) => d.join(&tmp_name),
        None => std::path::PathBuf::from(&tmp_name),
    };
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Writes the mesh and nodal scalar fields as a legacy ASCII VTK 3.0
/// unstructured grid (cell types 10 for tetrahedra, 13 for wedges).
pub fn write_vtk(path: &Path, mesh: &Mesh, fields: &[(&str, &[f64])]) -> Result<()> {
    for (name, f) in fields {
        if f.len() != mesh.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_nodes(),
                got: f.len(),
            });
        }
        if name.contains(char::is_whitespace) || name.is_empty() {
            return Err(Error::invalid(format!("bad VTK field name `{name}`")));
        }
    }

    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str("linesource output\n");
    s.push_str("ASCII\n");
    s.push_str("DATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.n_nodes());
    for p in mesh.nodes() {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    let stride = mesh.kind().nodes_per_cell();
    let m = mesh.n_cells();
    let _ = writeln!(s, "CELLS {} {}", m, m * (stride + 1));
    for c in 0..m {
        let n = mesh.cell(c);
        match mesh.kind() {
            ElementKind::Tet4 => {
                let _ = writeln!(s, "4 {} {} {} {}", n[0], n[1], n[2], n[3]);
            }
            ElementKind::Prism6 => {
                // VTK wedges want the base triangle oriented away from the
                // top face, the mirror of our ordering.
                let _ = writeln!(
                    s,
                    "6 {} {} {} {} {} {}",
                    n[0], n[2], n[1], n[3], n[5], n[4]
                );
            }
        }
    }
    let _ = writeln!(s, "CELL_TYPES {m}");
    let type_id = match mesh.kind() {
        ElementKind::Tet4 => 10,
        ElementKind::Prism6 => 13,
    };
    for _ in 0..m {
        let _ = writeln!(s, "{type_id}");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.n_nodes());
        for (name, f) in fields {
            let _ = writeln!(s, "SCALARS {name} double 1");
            s.push_str("LOOKUP_TABLE default\n");
            for v in *f {
                let _ = writeln!(s, "{v}");
            }
        }
    }
    atomic_write(path, s.as_bytes())
}

/// Writes a line network in the ASCII exchange format: one line per segment,
///
/// ```text
/// seg ax ay az bx by bz radius gamma
/// ```
///
/// with `#` starting a comment and blank lines ignored.  The format carries
/// geometry, vessel radius and coupling strength gamma only; on reading, each
/// segment's intensity is the constant `gamma * radius` (the network-problem
/// convention of taking the line intensity proportional to the radius).
pub fn write_network(path: &Path, net: &LineNetwork) -> Result<()> {
    atomic_write(path, network_text(net).as_bytes())
}

/// The serialized form [`write_network`] writes.
pub fn network_text(net: &LineNetwork) -> String {
    let mut s = String::new();
    for i in 0..net.len() {
        let seg = net.segment(i);
        let (a, b) = (seg.a(), seg.b());
        let _ = writeln!(
            s,
            "seg {} {} {} {} {} {} {} {}",
            a.x,
            a.y,
            a.z,
            b.x,
            b.y,
            b.z,
            net.radius(i),
            net.gamma(i),
        );
    }
    s
}

/// Reads the network format written by [`write_network`].  Requires at least
/// one segment.
pub fn read_network(path: &Path) -> Result<LineNetwork> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut net = LineNetwork::new();
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let l = line.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let mut tok = l.split_whitespace();
        let keyword = tok.next().expect("non-empty line");
        if keyword != "seg" {
            return Err(Error::parse(
                path,
                ln,
                format!("expected `seg`, got `{keyword}`"),
            ));
        }
        let vals: Result<Vec<f64>> = tok
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::parse(path, ln, format!("bad number `{v}`")))
            })
            .collect();
        let vals = vals?;
        if vals.len() != 8 {
            return Err(Error::parse(
                path,
                ln,
                format!(
                    "expected `seg ax ay az bx by bz radius gamma`, got {} values",
                    vals.len()
                ),
            ));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(path, ln, "non-finite value"));
        }
        let seg = Segment::new(
            Point3::new(vals[0], vals[1], vals[2]),
            Point3::new(vals[3], vals[4], vals[5]),
        )
        .map_err(|e| Error::parse(path, ln, e.to_string()))?;
        let radius = vals[6];
        if !(radius > 0.0) {
            return Err(Error::parse(
                path,
                ln,
                format!("radius must be positive, got {radius}"),
            ));
        }
        let gamma = vals[7];
        net.push(
            seg,
            IntensityProfile::constant(gamma * radius),
            radius,
            gamma,
        );
    }
    if net.is_empty() {
        return Err(Error::parse(path, 1, "network file contains no segments"));
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshParams;

    fn tmp_dir(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("linesource_io").join(name);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn sample_network() -> LineNetwork {
        let mut net = LineNetwork::new();
        net.push(
            Segment::new(Point3::new(0.1, 0.2, 0.3), Point3::new(0.4, 0.5, 0.9)).unwrap(),
            IntensityProfile::constant(1.0 * 0.013),
            0.013,
            1.0,
        );
        net.push(
            Segment::new(Point3::new(0.7, 0.1, 0.2), Point3::new(0.7, 0.8, 0.2)).unwrap(),
            IntensityProfile::constant(-0.1 * 0.05),
            0.05,
            -0.1,
        );
        net
    }

    #[test]
    fn network_round_trip_is_exact() {
        let path = tmp_dir("net").join("net.txt");
        let net = sample_network();
        write_network(&path, &net).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().all(|l| l.starts_with("seg ")));
        let back = read_network(&path).unwrap();
        assert_eq!(back.len(), net.len());
        for i in 0..net.len() {
            assert_eq!(back.segment(i).a(), net.segment(i).a());
            assert_eq!(back.segment(i).b(), net.segment(i).b());
            assert_eq!(back.profile(i).coeffs(), net.profile(i).coeffs());
            assert_eq!(back.radius(i), net.radius(i));
            assert_eq!(back.gamma(i), net.gamma(i));
        }
    }

    #[test]
    fn network_parser_reports_line_and_rejects_bad_input() {
        let dir = tmp_dir("badnet");
        for (content, bad_line) in [
            ("seg 0 0 0 1 1 1 0.1\n", 1),                       // too few fields
            ("seg 0 0 0 1 1 1 0.1 1 9\n", 1),                   // too many fields
            ("seg 0 0 0 1 1 1 nope 1\n", 1),                    // bad number
            ("seg 0 0 0 0 0 0 0.1 1\n", 1),                     // degenerate segment
            ("seg 0 0 0 1 1 1 -0.1 1\n", 1),                    // negative radius
            ("seg 0 0 0 1 1 1 0.1 1\nnode 1 2\n", 2),           // bad keyword
            ("# a comment only\n", 1),                          // no segments
        ] {
            let path = dir.join("bad.txt");
            std::fs::write(&path, content).unwrap();
            match read_network(&path) {
                Err(Error::Parse { line, .. }) => {
                    assert_eq!(line, bad_line, "for input {content:?}")
                }
                Err(other) => panic!("unexpected error {other:?} for {content:?}"),
                Ok(_) => panic!("expected parse failure for {content:?}"),
            }
        }
    }

    #[test]
    fn network_comments_and_blank_lines_are_ignored() {
        let path = tmp_dir("comments").join("net.txt");
        std::fs::write(
            &path,
            "# header comment\n\nseg 0 0 0 1 1 1 0.1 2.0 # trailing\n",
        )
        .unwrap();
        let net = read_network(&path).unwrap();
        assert_eq!(net.len(), 1);
        // Intensity is the constant gamma * radius.
        assert_eq!(net.profile(0).coeffs(), &[0.2]);
        assert_eq!(net.gamma(0), 2.0);
    }

    #[test]
    fn vtk_output_has_expected_structure() {
        for (mesh, type_id, stride) in [
            (Mesh::build_box_tet(&MeshParams::unit(2, 2)).unwrap(), "10", 4),
            (Mesh::build_box_prism(&MeshParams::unit(2, 2)).unwrap(), "13", 6),
        ] {
            let path = tmp_dir("vtk").join(format!("out{stride}.vtk"));
            let field: Vec<f64> = (0..mesh.n_nodes()).map(|i| i as f64).collect();
            write_vtk(&path, &mesh, &[("u", &field)]).unwrap();
            let text = std::fs::read_to_string(&path).unwrap();
            let lines: Vec<&str> = text.lines().collect();
            assert_eq!(lines[0], "# vtk DataFile Version 3.0");
            assert_eq!(lines[2], "ASCII");
            assert_eq!(lines[3], "DATASET UNSTRUCTURED_GRID");
            assert_eq!(lines[4], format!("POINTS {} double", mesh.n_nodes()));
            let cells_line = 5 + mesh.n_nodes();
            assert_eq!(
                lines[cells_line],
                format!(
                    "CELLS {} {}",
                    mesh.n_cells(),
                    mesh.n_cells() * (stride + 1)
                )
            );
            let types_line = cells_line + 1 + mesh.n_cells();
            assert_eq!(lines[types_line], format!("CELL_TYPES {}", mesh.n_cells()));
            assert_eq!(lines[types_line + 1], type_id);
            let data_line = types_line + 1 + mesh.n_cells();
            assert_eq!(lines[data_line], format!("POINT_DATA {}", mesh.n_nodes()));
            assert_eq!(lines[data_line + 1], "SCALARS u double 1");
            // Every cell line references valid node ids.
            for l in &lines[cells_line + 1..cells_line + 1 + mesh.n_cells()] {
                let ids: Vec<usize> = l
                    .split_whitespace()
                    .map(|t| t.parse().unwrap())
                    .collect();
                assert_eq!(ids[0], stride);
                assert!(ids[1..].iter().all(|&i| i < mesh.n_nodes()));
            }
        }
    }

    #[test]
    fn vtk_rejects_mismatched_field_length() {
        let mesh = Mesh::build_box_tet(&MeshParams::unit(1, 1)).unwrap();
        let path = tmp_dir("vtkbad").join("out.vtk");
        let short = vec![0.0; 3];
        assert!(matches!(
            write_vtk(&path, &mesh, &[("u", &short)]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn atomic_write_replaces_existing_content() {
        let path = tmp_dir("atomic").join("f.txt");
        atomic_write(&path, b"first").unwrap();
        atomic_write(&path, b"second").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
        // No temporary files left behind.
        let dir = path.parent().unwrap();
        let leftovers: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().contains(".tmp."))
            .collect();
        assert!(leftovers.is_empty(), "temp files left: {leftovers:?}");
    }

    #[test]
    fn atomic_write_fails_cleanly_for_missing_directory() {
        let path = std::env::temp_dir()
            .join("linesource_io_nonexistent_dir")
            .join("f.txt");
        assert!(matches!(
            atomic_write(&path, b"x"),
            Err(Error::Io { .. })
        ));
    }
}

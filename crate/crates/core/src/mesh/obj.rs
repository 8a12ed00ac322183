use super::{Mesh, MeshError};
use crate::linalg::Vec3;
use std::fmt::Write as _;
use std::path::Path;

/// Reads the OBJ subset: `v x y z`, `f i j k ...` (1-based, negative
/// indices relative to the end), `#` comments. Polygons are fan
/// triangulated; other directives are skipped with a warning.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_obj(&text)
}

pub fn parse_obj(text: &str) -> Result<Mesh, MeshError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut skipped = std::collections::BTreeSet::new();

    for (number, raw) in text.lines().enumerate() {
        let line_no = number + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().unwrap_or_default();
        let parse_err = |message: String| MeshError::Parse { line: line_no, message };
        match keyword {
            "v" => {
                let coords: Vec<f64> = tokens
                    .map(|t| t.parse::<f64>().map_err(|_| parse_err(format!("bad coordinate `{t}`"))))
                    .collect::<Result<_, _>>()?;
                if coords.len() < 3 || coords.len() > 4 {
                    return Err(parse_err(format!("expected 3 coordinates, found {}", coords.len())));
                }
                if coords.iter().any(|c| !c.is_finite()) {
                    return Err(parse_err("non-finite coordinate".into()));
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            "f" => {
                let mut polygon = Vec::new();
                for token in tokens {
                    // `i/vt/vn` forms keep only the position index.
                    let head = token.split('/').next().unwrap_or_default();
                    let index: i64 = head
                        .parse()
                        .map_err(|_| parse_err(format!("bad face index `{token}`")))?;
                    let resolved = if index > 0 {
                        index - 1
                    } else if index < 0 {
                        vertices.len() as i64 + index
                    } else {
                        return Err(parse_err("face index 0 (OBJ indices are 1-based)".into()));
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(parse_err(format!(
                            "face index {index} out of range ({} vertices so far)",
                            vertices.len()
                        )));
                    }
                    polygon.push(resolved as usize);
                }
                if polygon.len() < 3 {
                    return Err(parse_err(format!("face has {} vertices", polygon.len())));
                }
                for k in 1..polygon.len() - 1 {
                    let tri = [polygon[0], polygon[k], polygon[k + 1]];
                    if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                        return Err(parse_err("face repeats a vertex".into()));
                    }
                    faces.push(tri);
                }
            }
            other => {
                if skipped.insert(other.to_string()) {
                    log::warn!("line {line_no}: skipping unsupported OBJ directive `{other}`");
                }
            }
        }
    }

    if vertices.is_empty() {
        return Err(MeshError::Empty);
    }
    Mesh::new(vertices, faces)
}

/// OBJ text for `mesh`. Coordinates use the shortest round-trip float
/// formatting, so reloading reproduces them exactly.
pub fn write_obj(mesh: &Mesh) -> String {
    let mut out = String::with_capacity(mesh.vertices.len() * 40 + mesh.faces.len() * 20);
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    std::fs::write(path, write_obj(mesh))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: &str = "\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

    #[test]
    fn single_triangle() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!((m.vertex_count(), m.face_count()), (3, 1));
        assert_eq!(m.faces[0], [0, 1, 2]);
    }

    #[test]
    fn zero_index_is_an_error() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n").unwrap_err();
        assert!(matches!(err, MeshError::Parse { line: 4, .. }), "{err}");
    }

    #[test]
    fn cube_counts() {
        let m = parse_obj(CUBE).unwrap();
        assert_eq!((m.vertex_count(), m.face_count()), (8, 12));
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(parse_obj("v 1 2\n"), Err(MeshError::Parse { line: 1, .. })));
        assert!(matches!(parse_obj("v 1 2 x\n"), Err(MeshError::Parse { .. })));
        assert!(matches!(parse_obj("v 0 0 0\nf 1 2 3\n"), Err(MeshError::Parse { line: 2, .. })));
        assert!(matches!(parse_obj("# nothing\n"), Err(MeshError::Empty)));
    }

    #[test]
    fn quads_slashes_negatives_and_unknown_directives() {
        let text = "o thing\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\nf -4 -3 -2\n";
        let m = parse_obj(text).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3], [0, 1, 2]]);
    }

    #[test]
    fn round_trip_is_exact() {
        let mut m = parse_obj(CUBE).unwrap();
        m.vertices[3] += Vec3::new(0.1, 1.0 / 3.0, -2e-7);
        let back = parse_obj(&write_obj(&m)).unwrap();
        assert_eq!(back.faces, m.faces);
        assert_eq!(back.vertices, m.vertices);
    }

    #[test]
    fn faceless_mesh_round_trips() {
        let m = Mesh::new(vec![Vec3::zeros(), Vec3::x()], vec![]).unwrap();
        let text = write_obj(&m);
        assert!(text.lines().all(|l| l.starts_with("v ")));
        assert_eq!(parse_obj(&text).unwrap(), m);
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.obj");
        let m = parse_obj(CUBE).unwrap();
        save_mesh(&m, &path).unwrap();
        assert_eq!(load_mesh(&path).unwrap(), m);
        assert!(matches!(load_mesh(dir.path().join("missing.obj")), Err(MeshError::Io(_))));
    }
}

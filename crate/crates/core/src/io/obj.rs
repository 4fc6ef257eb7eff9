use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::meshing::TriangleMesh;

/// Wavefront OBJ. Vertex labels, when present, ride in the first texture
/// coordinate (`vt label 0`) with one `vt` per vertex.
pub fn mesh_to_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for p in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
    }
    if let Some(labels) = &mesh.vertex_labels {
        for l in labels {
            let _ = writeln!(s, "vt {l} 0");
        }
    }
    let labeled = mesh.vertex_labels.is_some();
    for f in &mesh.faces {
        let [a, b, c] = f.map(|i| i + 1);
        let _ = if labeled {
            writeln!(s, "f {a}/{a} {b}/{b} {c}/{c}")
        } else {
            writeln!(s, "f {a} {b} {c}")
        };
    }
    s
}

pub fn write_mesh_obj(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    mesh.validate()?;
    super::write_text(path, &mesh_to_obj(mesh))
}

pub fn read_mesh_obj(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text).map_err(|m| Error::format(path, m))
}

fn parse_obj(text: &str) -> std::result::Result<TriangleMesh, String> {
    let mut verts = Vec::new();
    let mut tex = Vec::new();
    let mut faces = Vec::new();
    let num = |t: Option<&str>, line: usize| -> std::result::Result<f64, String> {
        t.and_then(|s| s.parse().ok()).ok_or_else(|| format!("line {line}: bad number"))
    };
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => verts.push(Point3::new(num(it.next(), ln + 1)?, num(it.next(), ln + 1)?, num(it.next(), ln + 1)?)),
            Some("vt") => tex.push(num(it.next(), ln + 1)?),
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|t| {
                        let v: i64 = t.split('/').next().and_then(|s| s.parse().ok()).unwrap_or(0);
                        // negative indices count back from the latest vertex
                        let i = if v < 0 { verts.len() as i64 + v } else { v - 1 };
                        usize::try_from(i).map_err(|_| format!("line {}: bad face index", ln + 1))
                    })
                    .collect::<std::result::Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(format!("line {}: face with fewer than 3 corners", ln + 1));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    let mut m = TriangleMesh::new(verts, faces);
    if !tex.is_empty() && tex.len() == m.vertices.len() {
        m.vertex_labels = Some(tex.iter().map(|&t| t as u32).collect());
    }
    m.validate().map_err(|e| e.to_string())?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_labels() {
        let mut m = TriangleMesh::new(
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.5, 0.0, 0.0), Point3::new(0.0, 1.0, -0.25)],
            vec![[0, 1, 2]],
        );
        m.vertex_labels = Some(vec![0, 1, 1]);
        let back = parse_obj(&mesh_to_obj(&m)).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.faces, m.faces);
        assert_eq!(back.vertex_labels, m.vertex_labels);
    }

    #[test]
    fn quads_are_fanned() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(parse_obj("v 0 0 0\nf 1 2 3\n").is_err());
    }
}

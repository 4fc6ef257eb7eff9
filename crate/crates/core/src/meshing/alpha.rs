use std::collections::{HashMap, VecDeque};

use nalgebra::Point3;

use super::delaunay::Delaunay3;
use super::mesh::TriangleMesh;
use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Triangles and tetrahedra of the alpha complex, as stored Delaunay indices.
#[derive(Debug, Clone)]
pub struct AlphaComplex {
    pub tetrahedra: Vec<[usize; 4]>,
    /// Boundary triangles: faces of exactly one complex tetrahedron, plus
    /// Gabriel faces with circumradius below alpha that bound none.
    pub triangles: Vec<[usize; 3]>,
    /// Whether each triangle's orientation was fixed by its tetrahedron.
    pub anchored: Vec<bool>,
}

/// Circumcentre and radius of a triangle.
fn circumcircle(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Option<(Point3<f64>, f64)> {
    let (u, v) = (b - a, c - a);
    let w = u.cross(&v);
    let w2 = w.norm_squared();
    if w2 == 0.0 {
        return None;
    }
    let x = (v.cross(&w) * u.norm_squared() + w.cross(&u) * v.norm_squared()) / (2.0 * w2);
    Some((a + x, x.norm()))
}

pub fn alpha_complex(dt: &Delaunay3, alpha: f64) -> AlphaComplex {
    let pts = dt.points();
    let mut faces = dt.faces();
    faces.sort_by_key(|(f, t, _)| {
        let mut k = *f;
        k.sort_unstable();
        (k, *t)
    });
    let mut radius_cache: HashMap<usize, bool> = HashMap::new();
    let mut in_complex = |t: usize| {
        *radius_cache
            .entry(t)
            .or_insert_with(|| dt.is_finite(t) && dt.circumradius(&dt.tet_vertices(t)) < alpha)
    };
    let mut tetrahedra = Vec::new();
    let mut triangles = Vec::new();
    let mut anchored = Vec::new();
    let mut i = 0;
    while i < faces.len() {
        let mut key = faces[i].0;
        key.sort_unstable();
        let mut j = i + 1;
        while j < faces.len() && {
            let mut k = faces[j].0;
            k.sort_unstable();
            k == key
        } {
            j += 1;
        }
        let group = &faces[i..j];
        let inside: Vec<_> = group.iter().filter(|(_, t, _)| in_complex(*t)).collect();
        match inside.len() {
            1 => {
                triangles.push(inside[0].0);
                anchored.push(true);
            }
            0 => {
                let [a, b, c] = group[0].0.map(|v| pts[v]);
                if let Some((centre, r)) = circumcircle(&a, &b, &c) {
                    let gabriel = group.iter().all(|(_, _, opp)| {
                        opp.is_none_or(|o| (pts[o] - centre).norm_squared() >= r * r)
                    });
                    if r < alpha && gabriel {
                        triangles.push(group[0].0);
                        anchored.push(false);
                    }
                }
            }
            _ => {}
        }
        i = j;
    }
    for t in dt.finite_tets() {
        if in_complex(t) {
            tetrahedra.push(dt.tet_vertices(t));
        }
    }
    tetrahedra.sort_unstable();
    AlphaComplex {
        tetrahedra,
        triangles,
        anchored,
    }
}

/// Boundary of the alpha complex of the cloud, oriented outward: faces of a
/// complex tetrahedron point away from it, free-standing sheets are made
/// consistent with their neighbours and then face outward when closed or
/// toward the origin (the reference camera) when open.
pub fn alpha_shape_mesh(cloud: &PointCloud, alpha: f64) -> Result<TriangleMesh> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha must be positive"));
    }
    if cloud.len() < 4 {
        return Err(Error::invalid("alpha shapes need at least 4 points"));
    }
    let dt = Delaunay3::new(&cloud.points)?;
    let complex = alpha_complex(&dt, alpha);
    if complex.triangles.is_empty() {
        return Err(Error::EmptyMesh(alpha));
    }
    let mut faces = complex.triangles.clone();
    orient_sheets(dt.points(), &mut faces, &complex.anchored);
    let mut mesh = TriangleMesh::new(dt.points().to_vec(), faces);
    if let Some(labels) = &cloud.labels {
        mesh.vertex_labels = Some((0..dt.points().len()).map(|v| labels[dt.input_index(v)]).collect());
    }
    Ok(mesh.compact().with_vertex_normals())
}

fn orient_sheets(pts: &[Point3<f64>], faces: &mut [[usize; 3]], anchored: &[bool]) {
    let n = faces.len();
    let mut edge_faces: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (i, f) in faces.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            edge_faces.entry((a.min(b), a.max(b))).or_default().push(i);
        }
    }
    let has_directed = |f: &[usize; 3], a: usize, b: usize| (0..3).any(|k| f[k] == a && f[(k + 1) % 3] == b);
    let mut done: Vec<bool> = anchored.to_vec();
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| anchored[i]).collect();
    let propagate = |queue: &mut VecDeque<usize>, done: &mut Vec<bool>, faces: &mut [[usize; 3]], comp: &mut Vec<usize>| {
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            let f = faces[i];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let nb = &edge_faces[&(a.min(b), a.max(b))];
                if nb.len() != 2 {
                    continue;
                }
                let j = if nb[0] == i { nb[1] } else { nb[0] };
                if done[j] {
                    continue;
                }
                if has_directed(&faces[j], a, b) {
                    faces[j].swap(1, 2);
                }
                done[j] = true;
                queue.push_back(j);
            }
        }
    };
    let mut scratch = Vec::new();
    propagate(&mut queue, &mut done, faces, &mut scratch);
    for seed in 0..n {
        if done[seed] {
            continue;
        }
        done[seed] = true;
        queue.push_back(seed);
        let mut comp = Vec::new();
        propagate(&mut queue, &mut done, faces, &mut comp);
        let closed = comp.iter().all(|&i| {
            let f = faces[i];
            (0..3).all(|k| {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edge_faces[&(a.min(b), a.max(b))].len() == 2
            })
        });
        let score: f64 = comp
            .iter()
            .map(|&i| {
                let [a, b, c] = faces[i].map(|v| pts[v].coords);
                let cross = (b - a).cross(&(c - a));
                if closed {
                    a.dot(&(b.cross(&c)))
                } else {
                    -cross.dot(&((a + b + c) / 3.0))
                }
            })
            .sum();
        if score < 0.0 {
            for &i in &comp {
                faces[i].swap(1, 2);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> PointCloud {
        let s = 10.0 / 2f64.sqrt();
        PointCloud::from_points(vec![
            Point3::new(s, s, s) * 0.5,
            Point3::new(s, -s, -s) * 0.5,
            Point3::new(-s, s, -s) * 0.5,
            Point3::new(-s, -s, s) * 0.5,
        ])
    }

    #[test]
    fn regular_tetrahedron_gives_its_four_faces() {
        let m = alpha_shape_mesh(&tetra(), 100.0).unwrap();
        assert_eq!(m.faces.len(), 4);
        assert!(m.is_closed() && m.is_consistently_oriented());
        let (e0, e1) = (m.vertices[m.faces[0][0]], m.vertices[m.faces[0][1]]);
        assert!(((e0 - e1).norm() - 10.0).abs() < 1e-12);
        let c = Point3::origin();
        for f in 0..4 {
            let [a, _, _] = m.face_points(f);
            assert!(m.face_normal(f).dot(&(a - c)) > 0.0);
        }
    }

    #[test]
    fn tiny_alpha_is_empty() {
        assert!(matches!(alpha_shape_mesh(&tetra(), 1e-9), Err(Error::EmptyMesh(_))));
    }

    #[test]
    fn fibonacci_sphere_closes() {
        let r = 20.0;
        let n = 2000;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let pts = (0..n)
            .map(|i| {
                let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let rho = (1.0 - y * y).sqrt();
                let th = golden * i as f64;
                Point3::new(rho * th.cos(), y, rho * th.sin()) * r
            })
            .collect();
        let m = alpha_shape_mesh(&PointCloud::from_points(pts), 5.0).unwrap();
        assert!(m.is_closed(), "open sphere");
        assert!(m.is_consistently_oriented());
        assert_eq!(m.euler_characteristic(), 2);
        let area = m.total_area();
        let exact = 4.0 * std::f64::consts::PI * r * r;
        assert!((area - exact).abs() < 0.03 * exact, "area {area}");
        let outward = (0..m.faces.len()).all(|f| m.face_normal(f).dot(&m.face_points(f)[0].coords) > 0.0);
        assert!(outward);
    }
}

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::transform::RigidTransform;

/// Indexed triangle mesh in millimetres.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
    pub vertex_labels: Option<Vec<u32>>,
    pub vertex_normals: Option<Vec<Vector3<f64>>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Self {
        Self {
            vertices,
            faces,
            ..Default::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Index range, distinct corners and parallel attribute lengths.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (i, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&v| v >= n) {
                return Err(Error::invalid(format!("face {i} indexes past {n} vertices")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::invalid(format!("face {i} repeats a vertex")));
            }
        }
        if self.vertex_labels.as_ref().is_some_and(|l| l.len() != n) {
            return Err(Error::DimensionMismatch("vertex_labels length".into()));
        }
        if self.vertex_normals.as_ref().is_some_and(|l| l.len() != n) {
            return Err(Error::DimensionMismatch("vertex_normals length".into()));
        }
        Ok(())
    }

    pub fn face_points(&self, f: usize) -> [Point3<f64>; 3] {
        self.faces[f].map(|i| self.vertices[i])
    }

    /// `(b - a) x (c - a)`; twice the area, along the face normal.
    pub fn face_cross(&self, f: usize) -> Vector3<f64> {
        let [a, b, c] = self.face_points(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_cross(f).norm()
    }

    pub fn face_normal(&self, f: usize) -> Vector3<f64> {
        let c = self.face_cross(f);
        let n = c.norm();
        if n > 0.0 {
            c / n
        } else {
            Vector3::zeros()
        }
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Directed edge use counts.
    pub fn directed_edges(&self) -> HashMap<(usize, usize), usize> {
        let mut m = HashMap::with_capacity(self.faces.len() * 3);
        for f in &self.faces {
            for k in 0..3 {
                *m.entry((f[k], f[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        m
    }

    /// Every edge is used at most once per direction and every edge shared by
    /// two faces is used once in each direction.
    pub fn is_consistently_oriented(&self) -> bool {
        let d = self.directed_edges();
        d.iter().all(|(&(a, b), &c)| {
            let back = d.get(&(b, a)).copied().unwrap_or(0);
            c == 1 && back <= 1
        })
    }

    /// No edge has a single incident face.
    pub fn is_closed(&self) -> bool {
        let d = self.directed_edges();
        d.keys().all(|&(a, b)| d.contains_key(&(b, a)))
    }

    /// `V - E + F` over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for f in &self.faces {
            for &v in f {
                used[v] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| (0..3).map(move |k| (f[k].min(f[(k + 1) % 3]), f[k].max(f[(k + 1) % 3]))))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        v - edges.len() as i64 + self.faces.len() as i64
    }

    /// Drops unreferenced vertices, renumbering faces in order of first use
    /// by vertex index.
    pub fn compact(&self) -> Self {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        for f in &self.faces {
            for &v in f {
                remap[v] = 0;
            }
        }
        let mut keep = Vec::new();
        for (i, r) in remap.iter_mut().enumerate() {
            if *r == 0 {
                *r = keep.len();
                keep.push(i);
            }
        }
        Self {
            vertices: keep.iter().map(|&i| self.vertices[i]).collect(),
            faces: self.faces.iter().map(|f| f.map(|v| remap[v])).collect(),
            vertex_labels: self
                .vertex_labels
                .as_ref()
                .map(|l| keep.iter().map(|&i| l[i]).collect()),
            vertex_normals: self
                .vertex_normals
                .as_ref()
                .map(|l| keep.iter().map(|&i| l[i]).collect()),
        }
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        let mut out = self.clone();
        for p in &mut out.vertices {
            *p = t.apply(p);
        }
        if let Some(normals) = &mut out.vertex_normals {
            for n in normals {
                *n = t.apply_vector(n);
            }
        }
        out
    }

    /// Area-weighted vertex normals.
    pub fn with_vertex_normals(mut self) -> Self {
        let mut acc = vec![Vector3::zeros(); self.vertices.len()];
        for (i, f) in self.faces.iter().enumerate() {
            let c = self.face_cross(i);
            for &v in f {
                acc[v] += c;
            }
        }
        self.vertex_normals = Some(
            acc.into_iter()
                .map(|n| {
                    let l = n.norm();
                    if l > 0.0 {
                        n / l
                    } else {
                        Vector3::z()
                    }
                })
                .collect(),
        );
        self
    }

    /// Reverses every face.
    pub fn flipped(&self) -> Self {
        let mut out = self.clone();
        for f in &mut out.faces {
            f.swap(1, 2);
        }
        out
    }
}

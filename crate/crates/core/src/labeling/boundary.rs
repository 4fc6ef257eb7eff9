use std::collections::BTreeMap;

use nalgebra::Point3;

use super::region::{region_faces, RegionSelection};
use crate::error::{Error, Result};
use crate::meshing::TriangleMesh;

pub const DEFAULT_MERGE_DIST: f64 = 10.0;

/// Closed polyline; the closing edge from last to first is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLoop {
    pub vertices: Vec<Point3<f64>>,
    /// Source mesh vertex of each loop vertex, when the loop came from a mesh.
    pub mesh_vertices: Option<Vec<usize>>,
}

impl BoundaryLoop {
    pub fn new(vertices: Vec<Point3<f64>>) -> Result<Self> {
        let l = Self {
            vertices,
            mesh_vertices: None,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if n < 3 {
            return Err(Error::invalid(format!("loop has {n} vertices, need at least 3")));
        }
        if (0..n).any(|i| self.vertices[i] == self.vertices[(i + 1) % n]) {
            return Err(Error::invalid("loop has repeated consecutive vertices"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Closed polygon length.
    pub fn polygon_length(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| (self.vertices[(i + 1) % n] - self.vertices[i]).norm())
            .sum()
    }

    pub fn centroid(&self) -> Point3<f64> {
        let s = self.vertices.iter().fold(nalgebra::Vector3::zeros(), |a, p| a + p.coords);
        Point3::from(s / self.vertices.len() as f64)
    }

    /// JSON array of `[x, y, z]`.
    pub fn to_json_points(&self) -> Vec<[f64; 3]> {
        self.vertices.iter().map(|p| [p.x, p.y, p.z]).collect()
    }
}

/// Closed boundary of the largest region of faces labelled `label`.
///
/// Open edges of the region are chained into closed walks. The walk with the
/// longest polygon length is kept, and every other walk whose centroid lies
/// within `merge_dist` of one of its vertices is spliced in at the closest
/// vertex pair.
pub fn extract_region_boundary(mesh: &TriangleMesh, label: u32, merge_dist: f64) -> Result<BoundaryLoop> {
    let faces = region_faces(mesh, label, RegionSelection::Largest)?;
    let mut use_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &f in &faces {
        let t = mesh.faces[f];
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *use_count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let open: Vec<(usize, usize)> = use_count
        .into_iter()
        .filter(|&(_, c)| c == 1)
        .map(|(e, _)| e)
        .collect();
    if open.is_empty() {
        return Err(Error::WholeSurfaceLabeled(label));
    }
    let mut loops = chain(&open);
    loops.sort_by(|a, b| {
        let (la, lb) = (walk_length(mesh, a), walk_length(mesh, b));
        lb.total_cmp(&la).then_with(|| a.cmp(b))
    });
    let mut main = loops.remove(0);
    for other in loops {
        let c = centroid(mesh, &other);
        let near = main
            .iter()
            .map(|&v| (mesh.vertices[v] - c).norm())
            .fold(f64::INFINITY, f64::min);
        if near > merge_dist {
            continue;
        }
        let mut best = (f64::INFINITY, 0, 0);
        for (i, &a) in main.iter().enumerate() {
            for (j, &b) in other.iter().enumerate() {
                let d = (mesh.vertices[a] - mesh.vertices[b]).norm_squared();
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        let (_, i, j) = best;
        let mut spliced = main[..=i].to_vec();
        spliced.extend_from_slice(&other[j..]);
        spliced.extend_from_slice(&other[..=j]);
        spliced.extend_from_slice(&main[i..]);
        main = spliced;
    }
    let mut out = BoundaryLoop {
        vertices: main.iter().map(|&v| mesh.vertices[v]).collect(),
        mesh_vertices: Some(main),
    };
    // a bridge between touching loops can repeat a vertex back to back
    dedup_consecutive(&mut out);
    out.validate()?;
    Ok(out)
}

fn dedup_consecutive(l: &mut BoundaryLoop) {
    let n = l.vertices.len();
    let keep: Vec<usize> = (0..n)
        .filter(|&i| l.vertices[i] != l.vertices[(i + 1) % n])
        .collect();
    if keep.len() == n {
        return;
    }
    l.vertices = keep.iter().map(|&i| l.vertices[i]).collect();
    if let Some(m) = &l.mesh_vertices {
        l.mesh_vertices = Some(keep.iter().map(|&i| m[i]).collect());
    }
}

/// Splits an edge set in which every vertex has even degree into closed
/// walks that use each edge once.
fn chain(edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (i, &(a, b)) in edges.iter().enumerate() {
        adj.entry(a).or_default().push((b, i));
        adj.entry(b).or_default().push((a, i));
    }
    let mut used = vec![false; edges.len()];
    let mut loops = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (first, mut cur) = edges[start];
        let mut walk = vec![first];
        while cur != first {
            walk.push(cur);
            let next = adj[&cur].iter().find(|&&(_, e)| !used[e]).copied();
            match next {
                Some((v, e)) => {
                    used[e] = true;
                    cur = v;
                }
                // odd-degree vertex: a non-manifold region; close the walk here
                None => break,
            }
        }
        if walk.len() >= 3 {
            loops.push(walk);
        }
    }
    loops
}

fn walk_length(mesh: &TriangleMesh, w: &[usize]) -> f64 {
    (0..w.len())
        .map(|i| (mesh.vertices[w[(i + 1) % w.len()]] - mesh.vertices[w[i]]).norm())
        .sum()
}

fn centroid(mesh: &TriangleMesh, w: &[usize]) -> Point3<f64> {
    let s = w.iter().fold(nalgebra::Vector3::zeros(), |a, &v| a + mesh.vertices[v].coords);
    Point3::from(s / w.len() as f64)
}

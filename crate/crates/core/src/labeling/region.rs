use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::meshing::TriangleMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegionSelection {
    /// Largest edge-connected component; ties go to the component holding
    /// the lowest face index.
    #[default]
    Largest,
    All,
}

/// Faces whose three vertices carry `label`, in ascending order.
pub fn region_faces(mesh: &TriangleMesh, label: u32, selection: RegionSelection) -> Result<Vec<usize>> {
    let labels = mesh
        .vertex_labels
        .as_ref()
        .ok_or_else(|| Error::invalid("mesh has no vertex labels"))?;
    let faces: Vec<usize> = (0..mesh.faces.len())
        .filter(|&f| mesh.faces[f].iter().all(|&v| labels[v] == label))
        .collect();
    if faces.is_empty() {
        return Err(Error::EmptyRegion(label));
    }
    if selection == RegionSelection::All {
        return Ok(faces);
    }
    // union-find over faces sharing an edge
    let mut parent: Vec<usize> = (0..faces.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut edge_owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (i, &f) in faces.iter().enumerate() {
        let t = mesh.faces[f];
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            match edge_owner.entry((a.min(b), a.max(b))) {
                std::collections::hash_map::Entry::Occupied(o) => {
                    let (ra, rb) = (find(&mut parent, i), find(&mut parent, *o.get()));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
                std::collections::hash_map::Entry::Vacant(v) => {
                    v.insert(i);
                }
            }
        }
    }
    let mut size = vec![0usize; faces.len()];
    let roots: Vec<usize> = (0..faces.len()).map(|i| find(&mut parent, i)).collect();
    for &r in &roots {
        size[r] += 1;
    }
    // roots are component minima, so the first maximum is the lowest index
    let best = (0..faces.len())
        .max_by_key(|&r| (size[r], std::cmp::Reverse(r)))
        .unwrap();
    Ok(faces
        .iter()
        .zip(&roots)
        .filter(|(_, &r)| r == best)
        .map(|(&f, _)| f)
        .collect())
}

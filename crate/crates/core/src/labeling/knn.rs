use std::collections::BTreeMap;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::meshing::TriangleMesh;
use crate::spatial::{KdTree, Neighbor};

/// Label of the region of interest; wins every tie.
pub const ROI_LABEL: u32 = 1;
pub const DEFAULT_K: usize = 9;

/// Majority label among the `k` nearest of `neighbors` (sorted ascending,
/// possibly with extra points tied at the k-th distance).
///
/// Points strictly nearer than the k-th distance vote; the remaining slots go
/// to points tied at that distance, [`ROI_LABEL`] first, then ascending
/// label. Equal vote counts also resolve to [`ROI_LABEL`], then the smallest
/// label. The outcome does not depend on the order of the reference set.
pub fn vote(neighbors: &[Neighbor], labels: &[u32], k: usize) -> Option<u32> {
    if neighbors.is_empty() || k == 0 {
        return None;
    }
    let take = k.min(neighbors.len());
    let kth = neighbors[take - 1].dist2;
    let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
    let mut tied: Vec<u32> = Vec::new();
    let mut strict = 0;
    for n in neighbors {
        if n.dist2 < kth {
            *votes.entry(labels[n.index]).or_default() += 1;
            strict += 1;
        } else if n.dist2 == kth {
            tied.push(labels[n.index]);
        }
    }
    tied.sort_by_key(|&l| (l != ROI_LABEL, l));
    for l in tied.into_iter().take(take - strict) {
        *votes.entry(l).or_default() += 1;
    }
    votes
        .into_iter()
        .max_by_key(|&(l, c)| (c, l == ROI_LABEL, std::cmp::Reverse(l)))
        .map(|(l, _)| l)
}

/// Each vertex takes the majority label of its `k` nearest reference points
/// from the concatenation of `labeled_clouds`.
pub fn knn_label_transfer(mesh: &TriangleMesh, labeled_clouds: &[PointCloud], k: usize) -> Result<TriangleMesh> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if k % 2 == 0 {
        log::warn!("even k = {k} admits two-label ties; they resolve to label {ROI_LABEL}");
    }
    let mut labels = Vec::new();
    for (i, c) in labeled_clouds.iter().enumerate() {
        let Some(l) = &c.labels else {
            return Err(Error::invalid(format!("reference cloud {i} has no labels")));
        };
        if l.len() != c.len() {
            return Err(Error::DimensionMismatch(format!("reference cloud {i} labels")));
        }
        labels.extend_from_slice(l);
    }
    if labels.is_empty() {
        return Err(Error::invalid("empty reference set"));
    }
    let tree = KdTree::new(
        &labeled_clouds
            .iter()
            .flat_map(|c| c.points.iter().copied())
            .collect::<Vec<_>>(),
    );
    let vertex_labels = crate::par::map(&mesh.vertices, |v| {
        let nb = tree.knn_with_ties(&[v.x, v.y, v.z], k);
        vote(&nb, &labels, k).expect("reference set is non-empty")
    });
    let mut out = mesh.clone();
    out.vertex_labels = Some(vertex_labels);
    Ok(out)
}

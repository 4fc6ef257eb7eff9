//! Point clouds with optional per-point attributes.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::spatial::KdTree;
use crate::transform::RigidTransform;

/// Originating pixel of a back-projected point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourcePixel {
    pub frame: usize,
    pub x: u32,
    pub y: u32,
}

/// Positions in millimetres plus optional parallel attribute lists.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub colors: Option<Vec<[u8; 3]>>,
    pub normals: Option<Vec<Vector3<f64>>>,
    pub labels: Option<Vec<u32>>,
    pub source_pixels: Option<Vec<SourcePixel>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Point3<f64>>) -> Self {
        Self {
            points,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        let check = |name: &str, len: Option<usize>| match len {
            Some(l) if l != n => Err(Error::DimensionMismatch(format!(
                "{name} has {l} entries for {n} points"
            ))),
            _ => Ok(()),
        };
        check("colors", self.colors.as_ref().map(Vec::len))?;
        check("normals", self.normals.as_ref().map(Vec::len))?;
        check("labels", self.labels.as_ref().map(Vec::len))?;
        check("source_pixels", self.source_pixels.as_ref().map(Vec::len))?;
        if let Some(normals) = &self.normals {
            if let Some(bad) = normals.iter().find(|v| (v.norm() - 1.0).abs() > 1e-6) {
                return Err(Error::invalid(format!("non-unit normal {:?}", bad)));
            }
        }
        Ok(())
    }

    pub fn kd_tree(&self) -> KdTree {
        KdTree::new(&self.points)
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        let mut out = self.clone();
        for p in &mut out.points {
            *p = t.apply(p);
        }
        if let Some(normals) = &mut out.normals {
            for n in normals {
                *n = t.apply_vector(n);
            }
        }
        out
    }

    /// Keeps the points for which `keep` returns true, with their attributes.
    pub fn filter_indices(&self, keep: impl Fn(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        self.select(&idx)
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        fn pick<T: Clone>(v: &Option<Vec<T>>, idx: &[usize]) -> Option<Vec<T>> {
            v.as_ref().map(|v| idx.iter().map(|&i| v[i].clone()).collect())
        }
        Self {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            colors: pick(&self.colors, idx),
            normals: pick(&self.normals, idx),
            labels: pick(&self.labels, idx),
            source_pixels: pick(&self.source_pixels, idx),
        }
    }

    /// Concatenates clouds. An attribute survives only if every input has it.
    pub fn concat<'a>(clouds: impl IntoIterator<Item = &'a PointCloud>) -> Self {
        let clouds: Vec<&PointCloud> = clouds.into_iter().collect();
        fn join<T: Clone>(
            clouds: &[&PointCloud],
            get: impl Fn(&PointCloud) -> &Option<Vec<T>>,
        ) -> Option<Vec<T>> {
            let mut out = Vec::new();
            for c in clouds {
                out.extend_from_slice(get(c).as_ref()?);
            }
            Some(out)
        }
        Self {
            points: clouds.iter().flat_map(|c| c.points.iter().copied()).collect(),
            colors: join(&clouds, |c| &c.colors),
            normals: join(&clouds, |c| &c.normals),
            labels: join(&clouds, |c| &c.labels),
            source_pixels: join(&clouds, |c| &c.source_pixels),
        }
    }

    pub fn centroid(&self) -> Option<Point3<f64>> {
        if self.is_empty() {
            return None;
        }
        let sum = self
            .points
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.len() as f64))
    }
}

/// Centroid and covariance of a point subset.
pub(crate) fn covariance(points: impl Iterator<Item = Point3<f64>> + Clone) -> (Point3<f64>, Matrix3<f64>) {
    let mut n = 0usize;
    let mut sum = Vector3::zeros();
    for p in points.clone() {
        sum += p.coords;
        n += 1;
    }
    let mean = sum / n.max(1) as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    (Point3::from(mean), cov / n.max(1) as f64)
}

/// Eigen-decomposition with eigenvalues sorted ascending (vectors as columns).
pub(crate) fn sorted_eigen(cov: &Matrix3<f64>) -> ([f64; 3], [Vector3<f64>; 3]) {
    let eig = SymmetricEigen::new(*cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.map(|i| eig.eigenvalues[i]);
    let vecs = order.map(|i| eig.eigenvectors.column(i).into_owned().normalize());
    (vals, vecs)
}

/// Per-point normals from the smallest-eigenvalue direction of each point's
/// `k`-neighbourhood covariance, oriented toward `viewpoint`.
pub fn estimate_normals(cloud: &PointCloud, k: usize, viewpoint: &Point3<f64>) -> Result<PointCloud> {
    if k < 3 {
        return Err(Error::invalid("estimate_normals needs k >= 3"));
    }
    if cloud.len() < k + 1 {
        return Err(Error::invalid(format!(
            "estimate_normals needs at least {} points, got {}",
            k + 1,
            cloud.len()
        )));
    }
    let tree = cloud.kd_tree();
    let normals = cloud
        .points
        .iter()
        .map(|p| {
            // the query point itself is one of the k+1 nearest
            let nbrs = tree.knn(&[p.x, p.y, p.z], k + 1);
            let (_, cov) = covariance(nbrs.iter().map(|n| cloud.points[n.index]));
            let (_, vecs) = sorted_eigen(&cov);
            let mut n = vecs[0];
            if n.dot(&(p - viewpoint)) > 0.0 {
                n = -n;
            }
            n
        })
        .collect();
    let mut out = cloud.clone();
    out.normals = Some(normals);
    Ok(out)
}

/// Voxel-grid downsampling: averages positions, colours and normals per
/// occupied voxel, majority label (ties toward label 1, then the smaller id).
/// Output is ordered by voxel key, so the result is independent of thread
/// scheduling and hash seeds. Source pixels are dropped.
pub fn voxel_downsample(cloud: &PointCloud, voxel: f64) -> Result<PointCloud> {
    if !(voxel > 0.0) {
        return Err(Error::invalid("voxel size must be positive"));
    }
    let mut cells: BTreeMap<(i64, i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let key = (
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        );
        cells.entry(key).or_default().push(i);
    }
    let mut out = PointCloud::default();
    let mut colors = cloud.colors.as_ref().map(|_| Vec::with_capacity(cells.len()));
    let mut normals = cloud.normals.as_ref().map(|_| Vec::with_capacity(cells.len()));
    let mut labels = cloud.labels.as_ref().map(|_| Vec::with_capacity(cells.len()));
    for idx in cells.values() {
        let n = idx.len() as f64;
        let mean = idx
            .iter()
            .fold(Vector3::zeros(), |acc, &i| acc + cloud.points[i].coords)
            / n;
        out.points.push(Point3::from(mean));
        if let (Some(dst), Some(src)) = (&mut colors, &cloud.colors) {
            let mut acc = [0u32; 3];
            for &i in idx {
                for c in 0..3 {
                    acc[c] += src[i][c] as u32;
                }
            }
            let len = idx.len() as u32;
            dst.push(acc.map(|a| ((a + len / 2) / len) as u8));
        }
        if let (Some(dst), Some(src)) = (&mut normals, &cloud.normals) {
            let sum = idx.iter().fold(Vector3::zeros(), |acc, &i| acc + src[i]);
            let v = if sum.norm() > 1e-12 {
                sum.normalize()
            } else {
                src[idx[0]]
            };
            dst.push(v);
        }
        if let (Some(dst), Some(src)) = (&mut labels, &cloud.labels) {
            dst.push(majority_label(idx.iter().map(|&i| src[i])));
        }
    }
    out.colors = colors;
    out.normals = normals;
    out.labels = labels;
    Ok(out)
}

/// Most frequent label; ties prefer label 1, then the smallest id.
pub fn majority_label(labels: impl Iterator<Item = u32>) -> u32 {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let best = counts.values().copied().max().unwrap_or(0);
    if counts.get(&1) == Some(&best) {
        return 1;
    }
    counts
        .iter()
        .find(|(_, &c)| c == best)
        .map(|(&l, _)| l)
        .unwrap_or(0)
}

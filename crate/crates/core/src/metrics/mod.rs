//! Reconstruction accuracy against a ground-truth cloud.
//!
//! Distances are bidirectional: each direction is scored on its own and the
//! two are combined (mean for AD and NC, max for HD and HD90).

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::measure::OrientedBox;
use crate::meshing::TriangleMesh;
use crate::registration::{icp_point_to_point, IcpConfig};
use crate::spatial::KdTree;
use crate::transform::RigidTransform;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionMetrics {
    pub ad_mm: f64,
    pub hd_mm: f64,
    pub hd90_mm: f64,
    /// Only when both clouds carry normals.
    pub nc: Option<f64>,
    /// Points scored over both directions (pred + gt).
    pub n_points_eval: usize,
}

/// `n` points placed uniformly by area over the mesh, with face normals.
pub fn sample_mesh_uniform(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if mesh.is_empty() || n == 0 {
        return Err(Error::invalid("sampling needs a nonempty mesh and n >= 1"));
    }
    mesh.validate()?;
    let mut cdf = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cdf.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::invalid("mesh has zero total area"));
    }
    let normals: Vec<Vector3<f64>> = (0..mesh.faces.len()).map(|f| mesh.face_normal(f)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut out_normals = Vec::with_capacity(n);
    for _ in 0..n {
        let r = rng.random::<f64>() * total;
        let f = cdf.partition_point(|&c| c <= r).min(cdf.len() - 1);
        let [a, b, c] = mesh.face_points(f);
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        let p = a.coords * (1.0 - s) + b.coords * (s * (1.0 - r2)) + c.coords * (s * r2);
        points.push(Point3::from(p));
        out_normals.push(normals[f]);
    }
    let mut cloud = PointCloud::from_points(points);
    cloud.normals = Some(out_normals);
    Ok(cloud)
}

/// Points inside the closed box, attributes kept.
pub fn crop_to_region(cloud: &PointCloud, region: &OrientedBox) -> PointCloud {
    cloud.filter_indices(|i| region.contains(&cloud.points[i], 0.0))
}

/// Nearest-neighbor distances from every point of `from` to `to`, and the
/// matched index.
fn directed(from: &PointCloud, tree: &KdTree) -> (Vec<f64>, Vec<usize>) {
    crate::par::map(&from.points, |p| {
        let nb = tree.nearest(&[p.x, p.y, p.z]).expect("nonempty tree");
        (nb.dist2.sqrt(), nb.index)
    })
    .into_iter()
    .unzip()
}

/// 90th percentile by nearest rank: the `ceil(0.9 n)`-th smallest value.
pub fn percentile_nearest_rank(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

pub(crate) struct Directed {
    pub mean: f64,
    pub max: f64,
    pub p90: f64,
    pub nc: Option<f64>,
}

pub(crate) fn summarize(d: &[f64], idx: &[usize], from: &PointCloud, to: &PointCloud) -> Directed {
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let max = d.iter().copied().fold(0.0, f64::max);
    let p90 = percentile_nearest_rank(d, 0.9);
    let nc = match (&from.normals, &to.normals) {
        (Some(a), Some(b)) => {
            let s: f64 = a.iter().zip(idx).map(|(n, &j)| n.dot(&b[j]).abs().min(1.0)).sum();
            Some(s / a.len() as f64)
        }
        _ => None,
    };
    Directed { mean, max, p90, nc }
}

pub(crate) fn combine(a: Directed, b: Directed, n: usize) -> ReconstructionMetrics {
    ReconstructionMetrics {
        ad_mm: 0.5 * (a.mean + b.mean),
        hd_mm: a.max.max(b.max),
        hd90_mm: a.p90.max(b.p90),
        nc: a.nc.zip(b.nc).map(|(x, y)| 0.5 * (x + y)),
        n_points_eval: n,
    }
}

/// AD, HD, HD90 and NC between two clouds.
pub fn distance_metrics(pred: &PointCloud, gt: &PointCloud) -> Result<ReconstructionMetrics> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::invalid("distance metrics need two nonempty clouds"));
    }
    let (pt, gtt) = (pred.kd_tree(), gt.kd_tree());
    let (d_pg, i_pg) = directed(pred, &gtt);
    let (d_gp, i_gp) = directed(gt, &pt);
    Ok(combine(
        summarize(&d_pg, &i_pg, pred, gt),
        summarize(&d_gp, &i_gp, gt, pred),
        pred.len() + gt.len(),
    ))
}

#[derive(Debug, Clone, Copy)]
pub enum Prediction<'a> {
    Cloud(&'a PointCloud),
    Mesh(&'a TriangleMesh),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    /// Points sampled from a predicted mesh.
    pub n_samples: usize,
    pub seed: u64,
    pub icp: IcpConfig,
    /// Evenly strided subset of pred used for ICP; 0 uses all points.
    pub icp_points: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            n_samples: 200_000,
            seed: 0,
            icp: IcpConfig::default(),
            icp_points: 20_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub metrics: ReconstructionMetrics,
    /// Pred-to-gt alignment found by ICP.
    pub alignment: RigidTransform,
}

/// Samples a mesh prediction, aligns it onto `gt` by point-to-point ICP from
/// `init`, crops both clouds and scores them.
pub fn evaluate_reconstruction(
    pred: Prediction<'_>,
    gt: &PointCloud,
    init: &RigidTransform,
    crop: Option<&OrientedBox>,
    config: &EvaluationConfig,
) -> Result<Evaluation> {
    let sampled;
    let pred = match pred {
        Prediction::Cloud(c) => c,
        Prediction::Mesh(m) => {
            sampled = sample_mesh_uniform(m, config.n_samples, config.seed)?;
            &sampled
        }
    };
    let icp = if config.icp_points > 0 && pred.len() > config.icp_points {
        let stride = pred.len().div_ceil(config.icp_points);
        let sub = pred.filter_indices(|i| i % stride == 0);
        icp_point_to_point(&sub, gt, init, &config.icp)?
    } else {
        icp_point_to_point(pred, gt, init, &config.icp)?
    };
    let aligned = pred.transformed(&icp.transform);
    let (p, g) = match crop {
        Some(b) => (crop_to_region(&aligned, b), crop_to_region(gt, b)),
        None => (aligned, gt.clone()),
    };
    if p.is_empty() || g.is_empty() {
        return Err(Error::invalid("crop box leaves an empty cloud"));
    }
    Ok(Evaluation {
        metrics: distance_metrics(&p, &g)?,
        alignment: icp.transform,
    })
}

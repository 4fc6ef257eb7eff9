use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::registration::kabsch::{rigid_from_correspondences, CorrespondenceSet};
use crate::spatial::KdTree;
use crate::transform::RigidTransform;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcpConfig {
    /// Correspondence gate in mm.
    pub max_corr_dist: f64,
    pub max_iterations: usize,
    /// Relative RMSE improvement below which iteration stops.
    pub rel_fitness_eps: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            max_corr_dist: 5.0,
            max_iterations: 50,
            rel_fitness_eps: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    pub transform: RigidTransform,
    pub rmse: f64,
    /// RMSE after each accepted iterate, starting with the initial pose.
    pub rmse_history: Vec<f64>,
    /// Matched source points at the returned pose.
    pub correspondences: usize,
}

struct Matching {
    pairs: Vec<(Point3<f64>, Point3<f64>)>,
    rmse: f64,
}

fn match_points(source: &PointCloud, tree: &KdTree, pose: &RigidTransform, gate2: f64) -> Matching {
    let hits = crate::par::map(&source.points, |p| {
        let q = pose.apply(p);
        tree.nearest(&[q.x, q.y, q.z]).filter(|nb| nb.dist2 <= gate2)
    });
    let mut pairs = Vec::new();
    let mut sum = 0.0;
    for (p, nb) in source.points.iter().zip(hits) {
        if let Some(nb) = nb {
            let t = tree.point(nb.index);
            pairs.push((*p, Point3::new(t[0], t[1], t[2])));
            sum += nb.dist2;
        }
    }
    let rmse = if pairs.is_empty() {
        f64::INFINITY
    } else {
        (sum / pairs.len() as f64).sqrt()
    };
    Matching { pairs, rmse }
}

/// Point-to-point ICP aligning `source` onto `target`. An iterate that would
/// raise the RMSE is rejected and iteration stops, so the RMSE history is
/// nonincreasing.
pub fn icp_point_to_point(
    source: &PointCloud,
    target: &PointCloud,
    init: &RigidTransform,
    config: &IcpConfig,
) -> Result<IcpResult> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::invalid("ICP needs two nonempty clouds"));
    }
    if !(config.max_corr_dist > 0.0) {
        return Err(Error::invalid("max_corr_dist must be positive"));
    }
    let tree = target.kd_tree();
    let gate2 = config.max_corr_dist * config.max_corr_dist;
    let mut pose = *init;
    let mut current = match_points(source, &tree, &pose, gate2);
    if current.pairs.is_empty() {
        return Err(Error::NoOverlap {
            max_dist: config.max_corr_dist,
        });
    }
    let mut history = vec![current.rmse];
    for _ in 0..config.max_iterations {
        if current.rmse == 0.0 {
            break;
        }
        let Ok(next_pose) = rigid_from_correspondences(&CorrespondenceSet::new(current.pairs.clone()))
        else {
            break;
        };
        let next = match_points(source, &tree, &next_pose, gate2);
        if next.pairs.is_empty() || next.rmse > current.rmse {
            break;
        }
        let improvement = (current.rmse - next.rmse) / current.rmse;
        pose = next_pose;
        current = next;
        history.push(current.rmse);
        if improvement < config.rel_fitness_eps {
            break;
        }
    }
    Ok(IcpResult {
        transform: pose,
        rmse: current.rmse,
        rmse_history: history,
        correspondences: current.pairs.len(),
    })
}

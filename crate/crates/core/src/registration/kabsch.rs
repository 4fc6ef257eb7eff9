use nalgebra::{Matrix3, Point3, Rotation3, Vector3};

use crate::error::{Error, Result};
use crate::transform::RigidTransform;

/// Paired source/target points; `T * source_i ≈ target_i`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrespondenceSet {
    pub pairs: Vec<(Point3<f64>, Point3<f64>)>,
}

impl CorrespondenceSet {
    pub fn new(pairs: Vec<(Point3<f64>, Point3<f64>)>) -> Self {
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Ratio of the second to the first eigenvalue of the centred source scatter
/// below which the set counts as collinear (singular-value ratio 1e-6).
const COLLINEAR_TOL: f64 = 1e-12;

/// Closed-form least-squares rigid fit (centroids, cross-covariance SVD,
/// reflection correction).
pub fn rigid_from_correspondences(corr: &CorrespondenceSet) -> Result<RigidTransform> {
    let n = corr.len();
    if n < 3 {
        return Err(Error::DegenerateCorrespondences(format!(
            "{n} pairs, need at least 3"
        )));
    }
    let inv_n = 1.0 / n as f64;
    let src_mean = corr
        .pairs
        .iter()
        .fold(Vector3::zeros(), |a, (p, _)| a + p.coords)
        * inv_n;
    let dst_mean = corr
        .pairs
        .iter()
        .fold(Vector3::zeros(), |a, (_, q)| a + q.coords)
        * inv_n;

    let mut cross = Matrix3::zeros();
    let mut src_cov = Matrix3::zeros();
    for (p, q) in &corr.pairs {
        let ps = p.coords - src_mean;
        let qs = q.coords - dst_mean;
        cross += qs * ps.transpose();
        src_cov += ps * ps.transpose();
    }

    let src_sv = src_cov.symmetric_eigenvalues();
    let mut sv = [src_sv[0], src_sv[1], src_sv[2]];
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[0] <= 0.0 || sv[1] <= COLLINEAR_TOL * sv[0] {
        return Err(Error::DegenerateCorrespondences(
            "source points are coincident or collinear".into(),
        ));
    }

    let svd = cross.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::DegenerateCorrespondences("SVD failed".into()));
    };
    let d = (u * v_t).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    let r = u * correction * v_t;
    let t = dst_mean - r * src_mean;
    Ok(RigidTransform::new(Rotation3::from_matrix_unchecked(r), t))
}

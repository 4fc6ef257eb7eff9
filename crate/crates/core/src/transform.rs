//! Rigid transforms in SE(3), translations in millimetres.

use nalgebra::{Matrix3, Point3, Rotation3, Unit, Vector3, Vector6};
use serde::{Deserialize, Serialize};

/// A rigid motion `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(Rotation3::identity(), t)
    }

    /// Rotation of `angle` radians about `axis` followed by translation `t`.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, t: Vector3<f64>) -> Self {
        Self::new(Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle), t)
    }

    /// Projects a near-orthonormal 3x3 matrix onto SO(3) (nearest rotation
    /// in the Frobenius sense) before building the transform.
    pub fn from_matrix(m: &Matrix3<f64>, t: Vector3<f64>) -> Self {
        let svd = m.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let d = (u * v_t).determinant().signum();
        let r = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t;
        Self::new(Rotation3::from_matrix_unchecked(r), t)
    }

    /// Minimal local update: `exp([omega, v]) * self`, where `omega` is an
    /// axis-angle vector and `v` a translation.
    pub fn perturb_left(&self, xi: &Vector6<f64>) -> Self {
        let delta = RigidTransform::new(
            Rotation3::new(Vector3::new(xi[0], xi[1], xi[2])),
            Vector3::new(xi[3], xi[4], xi[5]),
        );
        delta.compose(self)
    }

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.inverse();
        Self {
            rotation: r,
            translation: -(r * self.translation),
        }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Rotation angle of `self^-1 * other` in radians.
    pub fn rotation_error(&self, other: &RigidTransform) -> f64 {
        rotation_angle(&(self.rotation.inverse() * other.rotation))
    }

    pub fn rotation_angle(&self) -> f64 {
        rotation_angle(&self.rotation)
    }

    /// Euclidean distance between translations.
    pub fn translation_error(&self, other: &RigidTransform) -> f64 {
        (self.translation - other.translation).norm()
    }

    /// Max of `|R^T R - I|` and `|det R - 1|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let m = self.rotation.matrix();
        let d = (m.transpose() * m - Matrix3::identity()).abs().max();
        d.max((m.determinant() - 1.0).abs())
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let m = self.rotation.matrix();
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn from_row_major(rotation: &[f64; 9], translation: &[f64; 3]) -> Self {
        let m = Matrix3::from_row_slice(rotation);
        Self::new(
            Rotation3::from_matrix_unchecked(m),
            Vector3::new(translation[0], translation[1], translation[2]),
        )
    }
}

/// Rotation angle via `atan2(|sin|, cos)`; stays accurate near zero where
/// `acos` of the trace loses half the digits.
pub fn rotation_angle(r: &Rotation3<f64>) -> f64 {
    let m = r.matrix();
    let s = Vector3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    )
    .norm()
        * 0.5;
    let c = (m.trace() - 1.0) * 0.5;
    s.atan2(c)
}

/// JSON form of a per-frame pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub frame: usize,
    pub rotation: [f64; 9],
    pub translation_mm: [f64; 3],
}

impl PoseRecord {
    pub fn new(frame: usize, t: &RigidTransform) -> Self {
        Self {
            frame,
            rotation: t.rotation_row_major(),
            translation_mm: [t.translation.x, t.translation.y, t.translation.z],
        }
    }

    pub fn transform(&self) -> RigidTransform {
        RigidTransform::from_row_major(&self.rotation, &self.translation_mm)
    }
}

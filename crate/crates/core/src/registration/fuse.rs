use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::cloud::{estimate_normals, voxel_downsample, PointCloud};
use crate::error::{Error, Result};
use crate::registration::marker::marker_alignment;
use crate::registration::odometry::{rgbd_odometry, OdometryConfig};
use crate::rgbd::{back_project, RgbdFrame, DEFAULT_Z_RANGE};
use crate::transform::RigidTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegistrationMethod {
    Odometry,
    Marker,
}

impl std::str::FromStr for RegistrationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "odometry" => Ok(Self::Odometry),
            "marker" => Ok(Self::Marker),
            other => Err(Error::invalid(format!("unknown registration method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    pub z_range: (f64, f64),
    /// Voxel edge for the merged cloud in mm; 0 disables downsampling.
    pub voxel_size: f64,
    /// Neighbourhood size for per-frame normals; 0 skips normals.
    pub normal_k: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            z_range: DEFAULT_Z_RANGE,
            voxel_size: 1.0,
            normal_k: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FusionResult {
    pub cloud: PointCloud,
    /// Pose of each frame in the frame-0 camera; `poses[0]` is the identity.
    pub poses: Vec<RigidTransform>,
}

/// Pose of `frame` relative to `reference` (frame camera → reference camera).
pub fn register_pair(
    frame: &RgbdFrame,
    reference: &RgbdFrame,
    method: RegistrationMethod,
    config: &OdometryConfig,
) -> Result<RigidTransform> {
    match method {
        RegistrationMethod::Odometry => {
            rgbd_odometry(frame, reference, config, &RigidTransform::identity()).map(|r| r.transform)
        }
        RegistrationMethod::Marker => marker_alignment(frame, reference, config.depth_scale),
    }
}

fn register_all(
    frames: &[RgbdFrame],
    method: RegistrationMethod,
    config: &OdometryConfig,
) -> Vec<Result<RigidTransform>> {
    let reference = &frames[0];
    let run = |i: usize| {
        register_pair(&frames[i], reference, method, config).map_err(|e| Error::Registration {
            frame: i,
            source: Box::new(e),
        })
    };
    #[cfg(not(target_arch = "wasm32"))]
    {
        std::thread::scope(|s| {
            let handles: Vec<_> = (1..frames.len()).map(|i| s.spawn(move || run(i))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("registration thread panicked"))
                .collect()
        })
    }
    #[cfg(target_arch = "wasm32")]
    {
        (1..frames.len()).map(run).collect()
    }
}

/// Registers every frame against frame 0, merges the back-projected clouds in
/// the frame-0 camera and voxel-downsamples the result.
pub fn fuse_frames(
    frames: &[RgbdFrame],
    method: RegistrationMethod,
    config: &OdometryConfig,
    fusion: &FusionConfig,
) -> Result<FusionResult> {
    if frames.is_empty() {
        return Err(Error::invalid("fuse_frames needs at least one frame"));
    }
    config.validate()?;
    let mut poses = vec![RigidTransform::identity()];
    for pose in register_all(frames, method, config) {
        poses.push(pose?);
    }
    let mut clouds = Vec::with_capacity(frames.len());
    for (frame, pose) in frames.iter().zip(&poses) {
        let mut cloud = back_project(frame, config.depth_scale, fusion.z_range)?;
        if fusion.normal_k > 0 && cloud.len() > fusion.normal_k {
            cloud = estimate_normals(&cloud, fusion.normal_k, &Point3::origin())?;
        }
        clouds.push(cloud.transformed(pose));
    }
    let merged = PointCloud::concat(&clouds);
    let cloud = if fusion.voxel_size > 0.0 {
        voxel_downsample(&merged, fusion.voxel_size)?
    } else {
        merged
    };
    Ok(FusionResult { cloud, poses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rgbd::{CameraIntrinsics, ColorImage, DepthImage};

    fn frame() -> RgbdFrame {
        let k = CameraIntrinsics::new(60.0, 60.0, 20.0, 15.0, 40, 30).unwrap();
        let mut depth = DepthImage::filled(40, 30, 0);
        let mut color = ColorImage::filled(40, 30, [0; 3]);
        for y in 2..28 {
            for x in 2..38 {
                depth.set(x, y, 450 + ((x * 7 + y * 3) % 5) as u16);
                color.set(x, y, [((x * 37 + y * 11) % 256) as u8; 3]);
            }
        }
        RgbdFrame::new(color, depth, k, 0).unwrap()
    }

    #[test]
    fn single_frame_is_its_own_cloud() {
        let f = frame();
        let cfg = FusionConfig {
            voxel_size: 0.0,
            ..Default::default()
        };
        let res = fuse_frames(
            std::slice::from_ref(&f),
            RegistrationMethod::Odometry,
            &OdometryConfig::default(),
            &cfg,
        )
        .unwrap();
        assert_eq!(res.poses, vec![RigidTransform::identity()]);
        let bp = back_project(&f, 1.0, DEFAULT_Z_RANGE).unwrap();
        assert_eq!(res.cloud.points, bp.points);
    }

    #[test]
    fn registration_errors_carry_the_frame_index() {
        let f = frame();
        let mut g = f.clone();
        g.depth.data.iter_mut().for_each(|d| *d = 0);
        let err = fuse_frames(
            &[f.clone(), f, g],
            RegistrationMethod::Odometry,
            &OdometryConfig::default(),
            &FusionConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Registration { frame: 2, .. }));
    }
}

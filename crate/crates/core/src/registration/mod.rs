//! Frame-to-frame rigid registration and multi-frame fusion.

mod fuse;
mod icp;
mod kabsch;
mod marker;
mod odometry;

pub use fuse::{fuse_frames, register_pair, FusionConfig, FusionResult, RegistrationMethod};
pub use icp::{icp_point_to_point, IcpConfig, IcpResult};
pub use kabsch::{rigid_from_correspondences, CorrespondenceSet};
pub use marker::{marker_alignment, sample_depth_bilinear};
pub use odometry::{
    rgbd_odometry, EnergyStats, OdometryConfig, OdometryProblem, OdometryResult, PixelEval,
    PixelResidual, LUMA,
};

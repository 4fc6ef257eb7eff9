//! Metric surface reconstruction from short RGB-D sequences and automatic
//! measurement of a labeled surface region.
//!
//! All lengths are millimetres. The pipeline runs
//! [`rgbd::back_project`] → [`registration::fuse_frames`] →
//! [`meshing::fit_bspline_surface`] → [`meshing::tessellate`] →
//! [`labeling::knn_label_transfer`] → [`measure::measure_region`], and
//! [`metrics`] scores a reconstruction against ground truth. [`synth`]
//! renders analytic scenes with exact poses, masks and marker corners.

pub mod cloud;
pub mod error;
pub mod io;
pub mod labeling;
pub mod measure;
pub mod meshing;
pub mod metrics;
mod par;
pub mod registration;
pub mod rgbd;
pub mod spatial;
pub mod synth;
pub mod transform;

pub use cloud::PointCloud;
pub use error::{Error, Result};
pub use rgbd::{CameraIntrinsics, RgbdFrame};
pub use transform::RigidTransform;

use std::time::Instant;

use woundmesh::labeling::{extract_region_boundary, knn_label_transfer, savitzky_golay_smooth, BoundaryLoop};
use woundmesh::measure::{measure_region, MeasurementReport};
use woundmesh::meshing::{alpha_shape_mesh, fit_bspline_surface, samples_for_spacing, tessellate, BsplineFit, TriangleMesh};
use woundmesh::registration::{fuse_frames, FusionResult};
use woundmesh::rgbd::back_project;
use woundmesh::{PointCloud, RgbdFrame, RigidTransform};

use crate::config::{MeshMethod, PipelineConfig};
use crate::Result;

pub struct Reconstruction {
    pub fused: FusionResult,
    pub mesh: TriangleMesh,
    /// B-spline meshing only.
    pub fit: Option<BsplineFit>,
    pub tessellation: Option<(usize, usize)>,
    pub registration_s: f64,
    pub meshing_s: f64,
}

/// Registers and fuses `frames` (the first is the reference) and meshes the
/// fused cloud. Everything is in the reference camera.
pub fn reconstruct(frames: &[RgbdFrame], depth_scale: f64, cfg: &PipelineConfig) -> Result<Reconstruction> {
    let t0 = Instant::now();
    let fused = fuse_frames(
        frames,
        cfg.registration.method,
        &cfg.registration.odometry(depth_scale),
        &cfg.fusion.fusion(),
    )?;
    let registration_s = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let (mesh, fit, tessellation) = match cfg.meshing.method {
        MeshMethod::Bspline => {
            let fit = fit_bspline_surface(&fused.cloud, &cfg.meshing.bspline())?;
            let n = samples_for_spacing(&fit.surface, cfg.meshing.tessellation_spacing_mm)?;
            let mesh = tessellate(&fit.surface, n)?;
            (mesh, Some(fit), Some(n))
        }
        MeshMethod::Alpha => (alpha_shape_mesh(&fused.cloud, cfg.meshing.alpha_mm)?, None, None),
    };
    Ok(Reconstruction {
        fused,
        mesh,
        fit,
        tessellation,
        registration_s,
        meshing_s: t1.elapsed().as_secs_f64(),
    })
}

/// Full-resolution masked clouds of each frame, moved into the reference
/// camera by `poses`.
pub fn labeled_clouds(
    frames: &[RgbdFrame],
    poses: &[RigidTransform],
    depth_scale: f64,
    cfg: &PipelineConfig,
) -> Result<Vec<PointCloud>> {
    let z = (cfg.fusion.z_min_mm, cfg.fusion.z_max_mm);
    frames
        .iter()
        .zip(poses)
        .map(|(f, p)| Ok(back_project(f, depth_scale, z)?.transformed(p)))
        .collect()
}

pub struct Measurement {
    pub labeled_mesh: TriangleMesh,
    /// Smoothed boundary the perimeter is taken on.
    pub boundary: BoundaryLoop,
    pub report: MeasurementReport,
}

pub fn measure(mesh: &TriangleMesh, clouds: &[PointCloud], cfg: &PipelineConfig) -> Result<Measurement> {
    let labeled_mesh = knn_label_transfer(mesh, clouds, cfg.labeling.k)?;
    let report = measure_region(&labeled_mesh, &cfg.measure)?;
    let m = &cfg.measure;
    let raw = extract_region_boundary(&labeled_mesh, m.label, m.merge_dist)?;
    let boundary = savitzky_golay_smooth(&raw, m.sg_window, m.sg_order)?;
    Ok(Measurement {
        labeled_mesh,
        boundary,
        report,
    })
}

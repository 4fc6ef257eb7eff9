use std::path::{Path, PathBuf};

use serde::Serialize;
use woundmesh::io::{
    read_cloud_ply, read_json, read_mesh_obj, read_mesh_ply, write_cloud_ply, write_frame, write_intrinsics,
    write_json, write_loop_json, write_loop_ply, write_mesh_obj, write_mesh_ply, Dataset, PlyEncoding,
};
use woundmesh::measure::{repeatability, MeasurementReport, RepeatabilityStats};
use woundmesh::meshing::{SurfaceDump, TriangleMesh};
use woundmesh::metrics::{evaluate_reconstruction, Prediction, ReconstructionMetrics};
use woundmesh::synth::{
    analytic_measurements, default_intrinsics, render_frame, sample_ground_truth, sweep_poses, RenderOptions,
    SceneSpec, SyntheticScene, SYNTH_DEPTH_SCALE,
};
use woundmesh::transform::PoseRecord;
use woundmesh::{Error, PointCloud, RigidTransform};

use crate::config::{CropBox, PipelineConfig};
use crate::pipeline::{self, Measurement};
use crate::{CliError, Result};

pub const POSES_FILE: &str = "poses.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.ply";
pub const ANALYTIC_FILE: &str = "analytic_report.json";
pub const SCENE_FILE: &str = "scene.json";
pub const CROP_FILE: &str = "crop_box.json";
pub const FUSED_FILE: &str = "fused.ply";
pub const MESH_PLY: &str = "mesh.ply";
pub const MESH_OBJ: &str = "mesh.obj";
pub const SURFACE_FILE: &str = "surface.json";
pub const RECONSTRUCTION_FILE: &str = "reconstruction.json";
pub const TIMING_FILE: &str = "timing.json";
pub const MEASUREMENT_FILE: &str = "measurement.json";
pub const LABELED_MESH_FILE: &str = "labeled_mesh.ply";
pub const BOUNDARY_JSON: &str = "boundary.json";
pub const BOUNDARY_PLY: &str = "boundary.ply";
pub const METRICS_FILE: &str = "metrics.json";
pub const REPEATABILITY_FILE: &str = "repeatability.json";

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

/// Renders the phantom along a sweep and writes a dataset directory plus its
/// ground truth.
pub fn synth(out: &Path, cfg: &PipelineConfig) -> Result<()> {
    ensure_dir(out)?;
    let s = &cfg.synth;
    let scene = SyntheticScene::new(SceneSpec {
        textured: s.textured,
        ..SceneSpec::default()
    })?;
    let k = default_intrinsics();
    let poses = sweep_poses(s.frames);
    for (i, pose) in poses.iter().enumerate() {
        let opts = RenderOptions {
            depth_noise_sigma: s.depth_noise_sigma_mm,
            depth_scale: SYNTH_DEPTH_SCALE,
            noise_seed: s.seed.wrapping_mul(1_000_003).wrapping_add(i as u64),
            timestamp_index: i,
        };
        write_frame(out, &render_frame(&scene, pose, &k, &opts)?)?;
    }
    write_intrinsics(out, &k, SYNTH_DEPTH_SCALE)?;
    let records: Vec<PoseRecord> = poses.iter().enumerate().map(|(i, p)| PoseRecord::new(i, p)).collect();
    write_json(&out.join(POSES_FILE), &records)?;
    let gt = sample_ground_truth(&scene, s.gt_samples, s.seed);
    write_cloud_ply(&out.join(GROUND_TRUTH_FILE), &gt, PlyEncoding::BinaryLittleEndian)?;
    write_json(&out.join(ANALYTIC_FILE), &analytic_measurements(&scene)?)?;
    write_json(&out.join(SCENE_FILE), scene.spec())?;
    let c = scene.spec().craters[scene.spec().region_crater];
    let crop = CropBox {
        center_mm: [c.center[0], c.center[1], -0.5 * c.depth],
        size_mm: [3.0 * c.rim_radius, 3.0 * c.rim_radius, (6.0 * c.depth).max(30.0)],
        rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
    };
    write_json(&out.join(CROP_FILE), &crop)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct MeshSummary {
    vertices: usize,
    faces: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    tessellation: Option<[usize; 2]>,
    area_mm2: f64,
}

#[derive(Debug, Serialize)]
struct FitSummary {
    residual_history_mm: Vec<f64>,
    fold_over: bool,
}

#[derive(Debug, Serialize)]
struct ReconstructionReport<'a> {
    frames: Vec<usize>,
    poses: Vec<PoseRecord>,
    fused_points: usize,
    mesh: MeshSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<FitSummary>,
    config: &'a PipelineConfig,
}

#[derive(Debug, Serialize, serde::Deserialize)]
pub struct Timing {
    pub registration_s: f64,
    pub meshing_s: f64,
    pub total_s: f64,
}

fn frame_ids(ds: &Dataset, cfg: &PipelineConfig) -> Vec<usize> {
    cfg.registration.frames.clone().unwrap_or_else(|| ds.frame_ids.clone())
}

/// Fuses and meshes a dataset. Output geometry is in the camera of the first
/// selected frame.
pub fn reconstruct(dataset: &Path, out: &Path, cfg: &PipelineConfig) -> Result<()> {
    let ds = Dataset::open(dataset)?;
    let ids = frame_ids(&ds, cfg);
    let frames = ds.load_frames(Some(&ids))?;
    let r = pipeline::reconstruct(&frames, ds.depth_scale, cfg)?;
    ensure_dir(out)?;
    let poses: Vec<PoseRecord> = ids.iter().zip(&r.fused.poses).map(|(&i, p)| PoseRecord::new(i, p)).collect();
    write_cloud_ply(&out.join(FUSED_FILE), &r.fused.cloud, PlyEncoding::Ascii)?;
    write_json(&out.join(POSES_FILE), &poses)?;
    write_mesh_ply(&out.join(MESH_PLY), &r.mesh, PlyEncoding::Ascii)?;
    write_mesh_obj(&out.join(MESH_OBJ), &r.mesh)?;
    if let Some(fit) = &r.fit {
        let dump: SurfaceDump = fit.surface.dump();
        write_json(&out.join(SURFACE_FILE), &dump)?;
    }
    let report = ReconstructionReport {
        frames: ids,
        poses,
        fused_points: r.fused.cloud.len(),
        mesh: MeshSummary {
            vertices: r.mesh.vertices.len(),
            faces: r.mesh.faces.len(),
            tessellation: r.tessellation.map(|(a, b)| [a, b]),
            area_mm2: r.mesh.total_area(),
        },
        fit: r.fit.as_ref().map(|f| FitSummary {
            residual_history_mm: f.residual_history.clone(),
            fold_over: f.fold_over,
        }),
        config: cfg,
    };
    write_json(&out.join(RECONSTRUCTION_FILE), &report)?;
    write_json(
        &out.join(TIMING_FILE),
        &Timing {
            registration_s: r.registration_s,
            meshing_s: r.meshing_s,
            total_s: r.registration_s + r.meshing_s,
        },
    )?;
    Ok(())
}

/// Where the reference labels come from.
pub enum LabelSource {
    /// Labeled point clouds already in the mesh frame.
    Clouds(Vec<PathBuf>),
    /// Masked frames of a dataset, placed by a poses file (the `poses.json`
    /// written by `reconstruct`).
    Dataset { dataset: PathBuf, poses: PathBuf },
}

pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    let is_obj = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj"));
    Ok(if is_obj { read_mesh_obj(path)? } else { read_mesh_ply(path)? })
}

fn load_labels(src: &LabelSource, cfg: &PipelineConfig) -> Result<Vec<PointCloud>> {
    match src {
        LabelSource::Clouds(paths) => paths.iter().map(|p| Ok(read_cloud_ply(p)?)).collect(),
        LabelSource::Dataset { dataset, poses } => {
            let ds = Dataset::open(dataset)?;
            let records: Vec<PoseRecord> = read_json(poses)?;
            let ids: Vec<usize> = records.iter().map(|r| r.frame).collect();
            let frames = ds.load_frames(Some(&ids))?;
            let transforms: Vec<RigidTransform> = records.iter().map(PoseRecord::transform).collect();
            pipeline::labeled_clouds(&frames, &transforms, ds.depth_scale, cfg)
        }
    }
}

#[derive(Debug, Serialize)]
struct MeasurementFile<'a> {
    #[serde(flatten)]
    report: &'a MeasurementReport,
    config: &'a PipelineConfig,
}

fn write_measurement(out: &Path, m: &Measurement, cfg: &PipelineConfig) -> Result<()> {
    ensure_dir(out)?;
    write_json(
        &out.join(MEASUREMENT_FILE),
        &MeasurementFile {
            report: &m.report,
            config: cfg,
        },
    )?;
    write_mesh_ply(&out.join(LABELED_MESH_FILE), &m.labeled_mesh, PlyEncoding::Ascii)?;
    write_loop_json(&out.join(BOUNDARY_JSON), &m.boundary)?;
    write_loop_ply(&out.join(BOUNDARY_PLY), &m.boundary)?;
    Ok(())
}

/// Labels the mesh from the reference clouds and measures the region.
pub fn measure(mesh: &Path, labels: &LabelSource, out: &Path, cfg: &PipelineConfig) -> Result<MeasurementReport> {
    let mesh = read_mesh(mesh)?;
    let clouds = load_labels(labels, cfg)?;
    let m = pipeline::measure(&mesh, &clouds, cfg)?;
    write_measurement(out, &m, cfg)?;
    Ok(m.report)
}

#[derive(Debug, Serialize)]
struct MetricsFile<'a> {
    #[serde(flatten)]
    metrics: &'a ReconstructionMetrics,
    alignment: PoseRecord,
    config: &'a PipelineConfig,
}

pub struct EvaluateArgs<'a> {
    pub pred: &'a Path,
    pub gt: &'a Path,
    /// Poses file and the frame whose pose maps the prediction into the
    /// ground-truth frame; the first record when no frame is given.
    pub init: Option<(&'a Path, Option<usize>)>,
    pub crop: Option<&'a Path>,
    pub out: &'a Path,
}

fn initial_pose(path: &Path, frame: Option<usize>) -> Result<RigidTransform> {
    let records: Vec<PoseRecord> = read_json(path)?;
    let rec = match frame {
        Some(f) => records.iter().find(|r| r.frame == f),
        None => records.first(),
    };
    rec.map(PoseRecord::transform).ok_or_else(|| {
        CliError::Core(Error::Format {
            path: path.to_path_buf(),
            message: format!("no pose for frame {frame:?}"),
        })
    })
}

/// Table row printed by `evaluate`.
pub fn metrics_row(m: &ReconstructionMetrics) -> String {
    let nc = m.nc.map_or("-".to_string(), |v| format!("{v:.3}"));
    format!(
        "AD {:.3} mm | HD {:.3} mm | HD90 {:.3} mm | NC {} | n {}",
        m.ad_mm, m.hd_mm, m.hd90_mm, nc, m.n_points_eval
    )
}

pub fn evaluate(args: &EvaluateArgs, cfg: &PipelineConfig) -> Result<ReconstructionMetrics> {
    let mesh = read_mesh(args.pred)?;
    // a PLY without faces is a point-cloud prediction
    let cloud = if mesh.faces.is_empty() { Some(read_cloud_ply(args.pred)?) } else { None };
    let pred = match &cloud {
        Some(c) => Prediction::Cloud(c),
        None => Prediction::Mesh(&mesh),
    };
    let gt = read_cloud_ply(args.gt)?;
    let init = match args.init {
        Some((p, f)) => initial_pose(p, f)?,
        None => RigidTransform::identity(),
    };
    let crop = match args.crop {
        Some(p) => Some(read_json::<CropBox>(p)?),
        None => cfg.evaluation.crop.clone(),
    };
    let region = crop.as_ref().map(CropBox::oriented_box);
    let ev = evaluate_reconstruction(pred, &gt, &init, region.as_ref(), &cfg.evaluation.evaluation())?;
    let mut resolved = cfg.clone();
    resolved.evaluation.crop = crop;
    write_json(
        args.out,
        &MetricsFile {
            metrics: &ev.metrics,
            alignment: PoseRecord::new(0, &ev.alignment),
            config: &resolved,
        },
    )?;
    Ok(ev.metrics)
}

#[derive(Debug, Serialize)]
struct RepeatRun {
    frames: Vec<usize>,
    #[serde(flatten)]
    report: MeasurementReport,
}

#[derive(Debug, Serialize)]
struct RepeatFile<'a> {
    runs: Vec<RepeatRun>,
    stats: &'a RepeatabilityStats,
    config: &'a PipelineConfig,
}

/// Reconstructs and measures each frame subset, labeling each mesh from its
/// own fused cloud, and reports the spread.
pub fn repeat(dataset: &Path, out: &Path, cfg: &PipelineConfig) -> Result<RepeatabilityStats> {
    let ds = Dataset::open(dataset)?;
    let subsets = cfg.repeat.subsets(&ds.frame_ids)?;
    let mut runs = Vec::new();
    for ids in subsets {
        let frames = ds.load_frames(Some(&ids))?;
        let r = pipeline::reconstruct(&frames, ds.depth_scale, cfg)?;
        let m = pipeline::measure(&r.mesh, std::slice::from_ref(&r.fused.cloud), cfg)?;
        runs.push(RepeatRun {
            frames: ids,
            report: m.report,
        });
    }
    let reports: Vec<MeasurementReport> = runs.iter().map(|r| r.report.clone()).collect();
    let stats = repeatability(&reports)?;
    ensure_dir(out)?;
    write_json(
        &out.join(REPEATABILITY_FILE),
        &RepeatFile {
            runs,
            stats: &stats,
            config: cfg,
        },
    )?;
    Ok(stats)
}

use std::path::Path;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};
use woundmesh::measure::{MeasureConfig, OrientedBox};
use woundmesh::meshing::BsplineFitConfig;
use woundmesh::metrics::EvaluationConfig;
use woundmesh::registration::{FusionConfig, IcpConfig, OdometryConfig, RegistrationMethod};
use woundmesh::rgbd::DEFAULT_Z_RANGE;

use crate::CliError;

/// Every tunable of the pipeline. Missing keys take their defaults and
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub registration: RegistrationSection,
    pub fusion: FusionSection,
    pub meshing: MeshingSection,
    pub labeling: LabelingSection,
    pub measure: MeasureConfig,
    pub evaluation: EvaluationSection,
    pub synth: SynthSection,
    pub repeat: RepeatSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationSection {
    pub method: RegistrationMethod,
    pub lambda: f64,
    pub pyramid_levels: usize,
    pub max_iterations_per_level: usize,
    pub convergence_eps: f64,
    pub max_depth_diff_mm: f64,
    pub prealign: bool,
    /// Dataset frame numbers to use; the first is the reference. All frames
    /// when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames: Option<Vec<usize>>,
}

impl Default for RegistrationSection {
    fn default() -> Self {
        let o = OdometryConfig::default();
        Self {
            method: RegistrationMethod::Odometry,
            lambda: o.lambda,
            pyramid_levels: o.pyramid_levels,
            max_iterations_per_level: o.max_iterations_per_level,
            convergence_eps: o.convergence_eps,
            max_depth_diff_mm: o.max_depth_diff,
            prealign: o.prealign,
            frames: None,
        }
    }
}

impl RegistrationSection {
    pub fn odometry(&self, depth_scale: f64) -> OdometryConfig {
        OdometryConfig {
            lambda: self.lambda,
            pyramid_levels: self.pyramid_levels,
            max_iterations_per_level: self.max_iterations_per_level,
            convergence_eps: self.convergence_eps,
            max_depth_diff: self.max_depth_diff_mm,
            depth_scale,
            prealign: self.prealign,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub z_min_mm: f64,
    pub z_max_mm: f64,
    /// 0 keeps every back-projected point.
    pub voxel_size_mm: f64,
    pub normal_k: usize,
}

impl Default for FusionSection {
    fn default() -> Self {
        let f = FusionConfig::default();
        Self {
            z_min_mm: DEFAULT_Z_RANGE.0,
            z_max_mm: DEFAULT_Z_RANGE.1,
            voxel_size_mm: f.voxel_size,
            normal_k: f.normal_k,
        }
    }
}

impl FusionSection {
    pub fn fusion(&self) -> FusionConfig {
        FusionConfig {
            z_range: (self.z_min_mm, self.z_max_mm),
            voxel_size: self.voxel_size_mm,
            normal_k: self.normal_k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MeshMethod {
    #[default]
    Bspline,
    Alpha,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshingSection {
    pub method: MeshMethod,
    pub grid: [usize; 2],
    pub degree: [usize; 2],
    pub smoothness: f64,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trim_resolution: Option<usize>,
    /// Target vertex spacing of the tessellated surface.
    pub tessellation_spacing_mm: f64,
    pub alpha_mm: f64,
}

impl Default for MeshingSection {
    fn default() -> Self {
        let b = BsplineFitConfig::default();
        Self {
            method: MeshMethod::Bspline,
            grid: [b.grid.0, b.grid.1],
            degree: [b.degree.0, b.degree.1],
            smoothness: b.smoothness,
            iterations: b.iterations,
            trim_resolution: b.trim_resolution,
            tessellation_spacing_mm: 0.4,
            alpha_mm: 5.0,
        }
    }
}

impl MeshingSection {
    pub fn bspline(&self) -> BsplineFitConfig {
        BsplineFitConfig {
            grid: (self.grid[0], self.grid[1]),
            degree: (self.degree[0], self.degree[1]),
            smoothness: self.smoothness,
            iterations: self.iterations,
            trim_resolution: self.trim_resolution,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelingSection {
    pub k: usize,
}

impl Default for LabelingSection {
    fn default() -> Self {
        Self {
            k: woundmesh::labeling::DEFAULT_K,
        }
    }
}

/// Box in the ground-truth frame; `rotation` holds the box axes as columns,
/// row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CropBox {
    pub center_mm: [f64; 3],
    pub size_mm: [f64; 3],
    #[serde(default = "identity_rows")]
    pub rotation: [f64; 9],
}

fn identity_rows() -> [f64; 9] {
    [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
}

impl CropBox {
    pub fn oriented_box(&self) -> OrientedBox {
        OrientedBox {
            center: Point3::from(self.center_mm),
            axes: Matrix3::from_row_slice(&self.rotation),
            extents: Vector3::from(self.size_mm),
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.size_mm.iter().any(|s| !(*s > 0.0)) {
            return Err("evaluation.crop.size_mm must be positive".into());
        }
        let r = Matrix3::from_row_slice(&self.rotation);
        if (r.transpose() * r - Matrix3::identity()).abs().max() > 1e-6 || r.determinant() < 0.0 {
            return Err("evaluation.crop.rotation must be a rotation matrix".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub n_samples: usize,
    pub seed: u64,
    pub icp_max_corr_dist_mm: f64,
    pub icp_max_iterations: usize,
    pub icp_rel_fitness_eps: f64,
    pub icp_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crop: Option<CropBox>,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        let e = EvaluationConfig::default();
        Self {
            n_samples: e.n_samples,
            seed: e.seed,
            icp_max_corr_dist_mm: e.icp.max_corr_dist,
            icp_max_iterations: e.icp.max_iterations,
            icp_rel_fitness_eps: e.icp.rel_fitness_eps,
            icp_points: e.icp_points,
            crop: None,
        }
    }
}

impl EvaluationSection {
    pub fn evaluation(&self) -> EvaluationConfig {
        EvaluationConfig {
            n_samples: self.n_samples,
            seed: self.seed,
            icp: IcpConfig {
                max_corr_dist: self.icp_max_corr_dist_mm,
                max_iterations: self.icp_max_iterations,
                rel_fitness_eps: self.icp_rel_fitness_eps,
            },
            icp_points: self.icp_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub frames: usize,
    pub depth_noise_sigma_mm: f64,
    /// Seeds the per-frame depth noise and the ground-truth samples.
    pub seed: u64,
    pub gt_samples: usize,
    pub textured: bool,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            frames: 4,
            depth_noise_sigma_mm: 0.5,
            seed: 0,
            gt_samples: 1_000_000,
            textured: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepeatSection {
    pub runs: usize,
    pub subset_size: usize,
    /// Gap between consecutive frames of a subset; subset `j` starts at
    /// frame position `j`.
    pub stride: usize,
    /// Explicit subsets of dataset frame numbers; overrides the three
    /// fields above.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsets: Option<Vec<Vec<usize>>>,
}

impl Default for RepeatSection {
    fn default() -> Self {
        Self {
            runs: 5,
            subset_size: 4,
            stride: 2,
            subsets: None,
        }
    }
}

impl RepeatSection {
    /// Frame subsets drawn from `ids` (ascending dataset frame numbers).
    pub fn subsets(&self, ids: &[usize]) -> Result<Vec<Vec<usize>>, CliError> {
        if let Some(s) = &self.subsets {
            return Ok(s.clone());
        }
        let span = (self.subset_size - 1) * self.stride;
        (0..self.runs)
            .map(|j| {
                if j + span >= ids.len() {
                    return Err(CliError::Config(format!(
                        "repeat needs {} frames for {} subsets of {} with stride {}, dataset has {}",
                        self.runs + span,
                        self.runs,
                        self.subset_size,
                        self.stride,
                        ids.len()
                    )));
                }
                Ok((0..self.subset_size).map(|i| ids[j + i * self.stride]).collect())
            })
            .collect()
    }
}

impl PipelineConfig {
    /// Reads a TOML file (if any), applies `section.key=value` overrides in
    /// order, then validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.registration
            .odometry(1.0)
            .validate()
            .map_err(|e| CliError::Config(format!("registration: {e}")))?;
        if let Some(f) = &self.registration.frames {
            if f.is_empty() {
                return bad("registration.frames must not be empty".into());
            }
        }
        let fu = &self.fusion;
        if !(fu.z_min_mm >= 0.0) || !(fu.z_max_mm > fu.z_min_mm) {
            return bad("fusion: need 0 <= z_min_mm < z_max_mm".into());
        }
        if !(fu.voxel_size_mm >= 0.0) {
            return bad("fusion.voxel_size_mm must be >= 0".into());
        }
        self.meshing
            .bspline()
            .validate()
            .map_err(|e| CliError::Config(format!("meshing: {e}")))?;
        if !(self.meshing.tessellation_spacing_mm > 0.0) || !(self.meshing.alpha_mm > 0.0) {
            return bad("meshing: tessellation_spacing_mm and alpha_mm must be positive".into());
        }
        if self.labeling.k == 0 {
            return bad("labeling.k must be >= 1".into());
        }
        let m = &self.measure;
        if m.sg_window % 2 == 0 || m.sg_window <= m.sg_order {
            return bad("measure: sg_window must be odd and larger than sg_order".into());
        }
        if !(m.merge_dist >= 0.0) {
            return bad("measure.merge_dist must be >= 0".into());
        }
        let e = &self.evaluation;
        if e.n_samples == 0 || e.icp_points == 0 || !(e.icp_max_corr_dist_mm > 0.0) {
            return bad("evaluation: n_samples, icp_points and icp_max_corr_dist_mm must be positive".into());
        }
        if let Some(c) = &e.crop {
            c.validate().map_err(CliError::Config)?;
        }
        let s = &self.synth;
        if s.frames == 0 || s.gt_samples == 0 || !(s.depth_noise_sigma_mm >= 0.0) {
            return bad("synth: frames and gt_samples must be positive, sigma >= 0".into());
        }
        let r = &self.repeat;
        match &r.subsets {
            Some(s) if s.len() < 2 || s.iter().any(|f| f.is_empty()) => {
                return bad("repeat.subsets needs at least two nonempty subsets".into());
            }
            None if r.runs < 2 || r.subset_size == 0 || r.stride == 0 => {
                return bad("repeat: runs >= 2, subset_size >= 1 and stride >= 1".into());
            }
            _ => {}
        }
        Ok(())
    }
}

/// `a.b.c=value`; the value is read as a TOML literal and falls back to a
/// bare string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {spec:?} is not key=value")))?;
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key {key:?}")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {key:?}: {p} is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

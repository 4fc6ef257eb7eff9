//! Perimeter, area and box dimensions of a labelled mesh region, and their
//! spread over repeated runs.

mod obb;
mod perimeter;
mod repeat;
mod report;

use serde::{Deserialize, Serialize};

pub use obb::{box_dimensions, minimal_box, pca_box, OrientedBox};
pub use perimeter::{perimeter, PeriodicSpline, ARC_LENGTH_TOL};
pub use repeat::{repeatability, MetricSpread, RepeatabilityStats};
pub use report::MeasurementReport;

use crate::error::Result;
use crate::labeling::{
    extract_region_boundary, region_faces, savitzky_golay_smooth, RegionSelection, DEFAULT_MERGE_DIST, ROI_LABEL,
};
use crate::meshing::TriangleMesh;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    pub label: u32,
    pub sg_window: usize,
    pub sg_order: usize,
    /// Minimum quadrature panels for the perimeter; `None` means ten per
    /// loop vertex.
    pub spline_samples: Option<usize>,
    pub merge_dist: f64,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            label: ROI_LABEL,
            sg_window: 9,
            sg_order: 2,
            spline_samples: None,
            merge_dist: DEFAULT_MERGE_DIST,
        }
    }
}

/// Sum of face areas over the largest component of faces labelled `label`.
pub fn surface_area(mesh: &TriangleMesh, label: u32) -> Result<f64> {
    surface_area_of(mesh, label, RegionSelection::Largest)
}

pub fn surface_area_of(mesh: &TriangleMesh, label: u32, selection: RegionSelection) -> Result<f64> {
    Ok(region_faces(mesh, label, selection)?
        .into_iter()
        .map(|f| mesh.face_area(f))
        .sum())
}

/// Boundary, smoothing, perimeter, area and box dimensions of one region.
pub fn measure_region(mesh: &TriangleMesh, cfg: &MeasureConfig) -> Result<MeasurementReport> {
    let faces = region_faces(mesh, cfg.label, RegionSelection::Largest)?;
    let boundary = extract_region_boundary(mesh, cfg.label, cfg.merge_dist)?;
    let smooth = savitzky_golay_smooth(&boundary, cfg.sg_window, cfg.sg_order)?;
    let samples = cfg.spline_samples.unwrap_or(10 * smooth.len());
    let perimeter_mm = perimeter(&smooth, samples)?;
    let area: f64 = faces.iter().map(|&f| mesh.face_area(f)).sum();
    let mut used: Vec<usize> = faces.iter().flat_map(|&f| mesh.faces[f]).collect();
    used.sort_unstable();
    used.dedup();
    let pts: Vec<_> = used.iter().map(|&v| mesh.vertices[v]).collect();
    let (h, w, d) = box_dimensions(&pts)?;
    Ok(MeasurementReport {
        perimeter_mm,
        surface_area_mm2: area,
        height_mm: h,
        width_mm: w,
        depth_mm: d,
        loop_vertex_count: smooth.len(),
        region_face_count: faces.len(),
    })
}

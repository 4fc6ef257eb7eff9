use serde::{Deserialize, Serialize};

/// Region measurements. Box extents are sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementReport {
    pub perimeter_mm: f64,
    pub surface_area_mm2: f64,
    pub height_mm: f64,
    pub width_mm: f64,
    pub depth_mm: f64,
    pub loop_vertex_count: usize,
    pub region_face_count: usize,
}

impl MeasurementReport {
    pub const METRICS: [&'static str; 5] = [
        "perimeter_mm",
        "surface_area_mm2",
        "height_mm",
        "width_mm",
        "depth_mm",
    ];

    /// Values in the order of [`Self::METRICS`].
    pub fn values(&self) -> [f64; 5] {
        [
            self.perimeter_mm,
            self.surface_area_mm2,
            self.height_mm,
            self.width_mm,
            self.depth_mm,
        ]
    }
}

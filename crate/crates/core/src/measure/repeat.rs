use serde::{Deserialize, Serialize};

use super::MeasurementReport;
use crate::error::{Error, Result};

/// Mean and pairwise absolute differences of one metric over runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSpread {
    pub mean: f64,
    pub max_pairwise_diff: f64,
    pub mean_pairwise_diff: f64,
}

impl MetricSpread {
    pub fn from_values(v: &[f64]) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::invalid(format!("{} run(s); need at least 2", v.len())));
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let (mut max, mut sum, mut pairs) = (0.0f64, 0.0, 0usize);
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                let d = (v[i] - v[j]).abs();
                max = max.max(d);
                sum += d;
                pairs += 1;
            }
        }
        Ok(Self {
            mean,
            max_pairwise_diff: max,
            mean_pairwise_diff: sum / pairs as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatabilityStats {
    pub runs: usize,
    pub perimeter_mm: MetricSpread,
    pub surface_area_mm2: MetricSpread,
    pub height_mm: MetricSpread,
    pub width_mm: MetricSpread,
    pub depth_mm: MetricSpread,
}

impl RepeatabilityStats {
    /// Spreads in the order of [`MeasurementReport::METRICS`].
    pub fn spreads(&self) -> [MetricSpread; 5] {
        [
            self.perimeter_mm,
            self.surface_area_mm2,
            self.height_mm,
            self.width_mm,
            self.depth_mm,
        ]
    }
}

pub fn repeatability(reports: &[MeasurementReport]) -> Result<RepeatabilityStats> {
    let column = |k: usize| -> Result<MetricSpread> {
        MetricSpread::from_values(&reports.iter().map(|r| r.values()[k]).collect::<Vec<_>>())
    };
    Ok(RepeatabilityStats {
        runs: reports.len(),
        perimeter_mm: column(0)?,
        surface_area_mm2: column(1)?,
        height_mm: column(2)?,
        width_mm: column(3)?,
        depth_mm: column(4)?,
    })
}

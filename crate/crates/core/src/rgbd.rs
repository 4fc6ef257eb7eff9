//! Calibrated RGB-D frames, the pinhole camera model, depth preprocessing and
//! back-projection into point clouds.
//!
//! Pixel `(x, y)` refers to the pixel centre at integer coordinates; depth is
//! stored as raw 16-bit units and converted to millimetres with a
//! `depth_scale` (mm per unit). A raw value of 0 means "no measurement".

use nalgebra::{Matrix3, Point3};
use serde::{Deserialize, Serialize};

use crate::cloud::{PointCloud, SourcePixel};
use crate::error::{Error, Result};

/// Default accepted depth band in millimetres.
pub const DEFAULT_Z_RANGE: (f64, f64) = (300.0, 800.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::invalid(format!(
                "focal lengths must be positive (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(Error::invalid(format!(
                "cx = {} outside [0, {})",
                self.cx, self.width
            )));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::invalid(format!(
                "cy = {} outside [0, {})",
                self.cy, self.height
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Lifts pixel `(x, y)` at depth `z` (mm) to camera coordinates: `z K^-1 [x y 1]^T`.
    #[inline]
    pub fn unproject(&self, x: f64, y: f64, z: f64) -> Point3<f64> {
        Point3::new(z * (x - self.cx) / self.fx, z * (y - self.cy) / self.fy, z)
    }

    /// Intrinsics of an image downsampled by 2 with 2x2 block averaging.
    pub fn halved(&self) -> Self {
        Self {
            fx: self.fx / 2.0,
            fy: self.fy / 2.0,
            cx: ((self.cx - 0.5) / 2.0).max(0.0),
            cy: ((self.cy - 0.5) / 2.0).max(0.0),
            width: self.width / 2,
            height: self.height / 2,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64
    }
}

/// Result of projecting a camera-space point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub in_frame: bool,
}

/// Projects a camera-space point (mm) to continuous pixel coordinates.
pub fn project(point: &Point3<f64>, intrinsics: &CameraIntrinsics) -> Result<Projection> {
    if !(point.z > 0.0) {
        return Err(Error::BehindCamera(point.z));
    }
    let x = intrinsics.fx * point.x / point.z + intrinsics.cx;
    let y = intrinsics.fy * point.y / point.z + intrinsics.cy;
    Ok(Projection {
        x,
        y,
        z: point.z,
        in_frame: intrinsics.contains(x, y),
    })
}

/// Row-major image buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Clone> Image<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "buffer has {} elements, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }
}

impl<T> Image<T> {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// Raw depth units; 0 encodes a missing measurement.
pub type DepthImage = Image<u16>;
pub type ColorImage = Image<[u8; 3]>;
/// 0 = background, 1 = region of interest.
pub type LabelMask = Image<u8>;

/// Four ordered corner pixels of one fiducial marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerObservation {
    pub id: i64,
    pub corners: [[f64; 2]; 4],
}

#[derive(Debug, Clone)]
pub struct RgbdFrame {
    pub color: ColorImage,
    pub depth: DepthImage,
    pub intrinsics: CameraIntrinsics,
    pub mask: Option<LabelMask>,
    pub marker_corners: Option<Vec<MarkerObservation>>,
    pub timestamp_index: usize,
}

impl RgbdFrame {
    pub fn new(
        color: ColorImage,
        depth: DepthImage,
        intrinsics: CameraIntrinsics,
        timestamp_index: usize,
    ) -> Result<Self> {
        let frame = Self {
            color,
            depth,
            intrinsics,
            mask: None,
            marker_corners: None,
            timestamp_index,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn with_mask(mut self, mask: LabelMask) -> Result<Self> {
        self.mask = Some(mask);
        self.validate()?;
        Ok(self)
    }

    pub fn with_markers(mut self, markers: Vec<MarkerObservation>) -> Result<Self> {
        self.marker_corners = Some(markers);
        self.validate()?;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        let dims = (self.intrinsics.width, self.intrinsics.height);
        if self.depth.dims() != dims {
            return Err(Error::DimensionMismatch(format!(
                "depth is {:?}, intrinsics say {:?}",
                self.depth.dims(),
                dims
            )));
        }
        if self.color.dims() != dims {
            return Err(Error::DimensionMismatch(format!(
                "color is {:?}, intrinsics say {:?}",
                self.color.dims(),
                dims
            )));
        }
        if let Some(mask) = &self.mask {
            if mask.dims() != dims {
                return Err(Error::DimensionMismatch(format!(
                    "mask is {:?}, intrinsics say {:?}",
                    mask.dims(),
                    dims
                )));
            }
            if mask.data.iter().any(|&v| v > 1) {
                return Err(Error::invalid("mask labels must be 0 or 1"));
            }
        }
        if let Some(markers) = &self.marker_corners {
            for m in markers {
                for c in &m.corners {
                    if !self.intrinsics.contains(c[0], c[1]) {
                        return Err(Error::invalid(format!(
                            "marker {} corner ({}, {}) outside the image",
                            m.id, c[0], c[1]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Depth in mm at integer pixel, `None` when missing.
    #[inline]
    pub fn depth_mm(&self, x: usize, y: usize, depth_scale: f64) -> Option<f64> {
        let raw = *self.depth.get(x, y);
        (raw != 0).then(|| raw as f64 * depth_scale)
    }
}

/// Lifts every pixel whose depth (in mm) lies in the closed `z_range` to a
/// camera-space point, row-major over pixels.
pub fn back_project(frame: &RgbdFrame, depth_scale: f64, z_range: (f64, f64)) -> Result<PointCloud> {
    frame.validate()?;
    if !(z_range.0 >= 0.0) || z_range.1 < z_range.0 {
        return Err(Error::invalid(format!("bad z_range {:?}", z_range)));
    }
    if !(depth_scale > 0.0) {
        return Err(Error::invalid("depth_scale must be positive"));
    }
    let k = &frame.intrinsics;
    let mut points = Vec::new();
    let mut colors = Vec::new();
    let mut labels = Vec::new();
    let mut pixels = Vec::new();
    for y in 0..k.height {
        for x in 0..k.width {
            let Some(z) = frame.depth_mm(x, y, depth_scale) else {
                continue;
            };
            if z < z_range.0 || z > z_range.1 {
                continue;
            }
            points.push(k.unproject(x as f64, y as f64, z));
            colors.push(*frame.color.get(x, y));
            if let Some(mask) = &frame.mask {
                labels.push(*mask.get(x, y) as u32);
            }
            pixels.push(SourcePixel {
                frame: frame.timestamp_index,
                x: x as u32,
                y: y as u32,
            });
        }
    }
    let mut cloud = PointCloud::from_points(points);
    cloud.colors = Some(colors);
    if frame.mask.is_some() {
        cloud.labels = Some(labels);
    }
    cloud.source_pixels = Some(pixels);
    Ok(cloud)
}

/// Median hole filling and smoothing over an odd `window`.
///
/// Zero pixels with at least `min_valid` nonzero window neighbours take
/// their median; nonzero pixels take the median of the nonzero window values.
/// Even-sized medians average the two middle values, rounding half up.
pub fn fill_depth_holes(depth: &DepthImage, window: usize, min_valid: usize) -> DepthImage {
    if window < 3 || window % 2 == 0 {
        return depth.clone();
    }
    let r = (window / 2) as isize;
    let (w, h) = (depth.width as isize, depth.height as isize);
    let mut out = depth.clone();
    let mut buf: Vec<u16> = Vec::with_capacity(window * window);
    for y in 0..h {
        for x in 0..w {
            buf.clear();
            for dy in -r..=r {
                let yy = y + dy;
                if yy < 0 || yy >= h {
                    continue;
                }
                for dx in -r..=r {
                    let xx = x + dx;
                    if xx < 0 || xx >= w {
                        continue;
                    }
                    let v = *depth.get(xx as usize, yy as usize);
                    if v != 0 {
                        buf.push(v);
                    }
                }
            }
            let centre = *depth.get(x as usize, y as usize);
            if centre == 0 && (buf.len() < min_valid.max(1)) {
                continue;
            }
            if buf.is_empty() {
                continue;
            }
            out.set(x as usize, y as usize, median_u16(&mut buf));
        }
    }
    out
}

fn median_u16(values: &mut [u16]) -> u16 {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        let s = values[n / 2 - 1] as u32 + values[n / 2] as u32;
        s.div_ceil(2) as u16
    }
}

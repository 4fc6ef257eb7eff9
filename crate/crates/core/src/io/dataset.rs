//! Dataset directory layout:
//!
//! ```text
//! intrinsics.json
//! frames/0000.color.png   8-bit RGB
//! frames/0000.depth.png   16-bit depth, depth_scale_mm per unit
//! frames/0000.mask.png    optional, 0 / 255
//! frames/0000.markers.json optional, [{"id", "corners"}]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::image::{read_color_png, read_depth_png, read_mask_png, write_color_png, write_depth_png, write_mask_png};
use super::{read_json, write_json};
use crate::error::{Error, Result};
use crate::rgbd::{CameraIntrinsics, MarkerObservation, RgbdFrame};

pub const INTRINSICS_FILE: &str = "intrinsics.json";
pub const FRAMES_DIR: &str = "frames";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicsFile {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Millimetres per raw depth unit; 1 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_scale_mm: Option<f64>,
}

impl IntrinsicsFile {
    pub fn new(k: &CameraIntrinsics, depth_scale_mm: f64) -> Self {
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
            depth_scale_mm: Some(depth_scale_mm),
        }
    }
}

pub fn frame_path(root: &Path, id: usize, kind: &str) -> PathBuf {
    root.join(FRAMES_DIR).join(format!("{id:04}.{kind}"))
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub intrinsics: CameraIntrinsics,
    pub depth_scale: f64,
    /// Frame numbers found on disk, ascending.
    pub frame_ids: Vec<usize>,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let kpath = root.join(INTRINSICS_FILE);
        let k: IntrinsicsFile = read_json(&kpath)?;
        let intrinsics = CameraIntrinsics::new(k.fx, k.fy, k.cx, k.cy, k.width, k.height)
            .map_err(|e| Error::format(&kpath, e.to_string()))?;
        let depth_scale = k.depth_scale_mm.unwrap_or(1.0);
        if !(depth_scale > 0.0 && depth_scale.is_finite()) {
            return Err(Error::format(&kpath, "depth_scale_mm must be positive"));
        }
        let dir = root.join(FRAMES_DIR);
        let entries = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut frame_ids = Vec::new();
        for e in entries {
            let e = e.map_err(|e| Error::io(&dir, e))?;
            let name = e.file_name();
            let Some(stem) = name.to_str().and_then(|s| s.strip_suffix(".depth.png")) else {
                continue;
            };
            if let Ok(id) = stem.parse::<usize>() {
                frame_ids.push(id);
            }
        }
        frame_ids.sort_unstable();
        if frame_ids.is_empty() {
            return Err(Error::format(&dir, "no NNNN.depth.png frames"));
        }
        Ok(Self {
            root: root.to_path_buf(),
            intrinsics,
            depth_scale,
            frame_ids,
        })
    }

    /// Loads frame `id` with its optional mask and markers.
    pub fn load_frame(&self, id: usize) -> Result<RgbdFrame> {
        let depth_path = frame_path(&self.root, id, "depth.png");
        let color_path = frame_path(&self.root, id, "color.png");
        let depth = read_depth_png(&depth_path)?;
        let color = read_color_png(&color_path)?;
        let mut frame = RgbdFrame::new(color, depth, self.intrinsics, id)
            .map_err(|e| Error::format(&depth_path, e.to_string()))?;
        let mask_path = frame_path(&self.root, id, "mask.png");
        if mask_path.exists() {
            frame = frame
                .with_mask(read_mask_png(&mask_path)?)
                .map_err(|e| Error::format(&mask_path, e.to_string()))?;
        }
        let marker_path = frame_path(&self.root, id, "markers.json");
        if marker_path.exists() {
            let markers: Vec<MarkerObservation> = read_json(&marker_path)?;
            frame = frame
                .with_markers(markers)
                .map_err(|e| Error::format(&marker_path, e.to_string()))?;
        }
        Ok(frame)
    }

    /// Loads the listed frames, or all of them for `None`.
    pub fn load_frames(&self, ids: Option<&[usize]>) -> Result<Vec<RgbdFrame>> {
        let ids = ids.unwrap_or(&self.frame_ids);
        ids.iter()
            .map(|&id| {
                if !self.frame_ids.contains(&id) {
                    return Err(Error::format(frame_path(&self.root, id, "depth.png"), "frame not in dataset"));
                }
                self.load_frame(id)
            })
            .collect()
    }
}

pub fn write_intrinsics(root: &Path, k: &CameraIntrinsics, depth_scale_mm: f64) -> Result<()> {
    write_json(&root.join(INTRINSICS_FILE), &IntrinsicsFile::new(k, depth_scale_mm))
}

/// Writes the frame under its `timestamp_index`.
pub fn write_frame(root: &Path, frame: &RgbdFrame) -> Result<()> {
    let id = frame.timestamp_index;
    write_color_png(&frame_path(root, id, "color.png"), &frame.color)?;
    write_depth_png(&frame_path(root, id, "depth.png"), &frame.depth)?;
    if let Some(m) = &frame.mask {
        write_mask_png(&frame_path(root, id, "mask.png"), m)?;
    }
    if let Some(m) = &frame.marker_corners {
        write_json(&frame_path(root, id, "markers.json"), m)?;
    }
    Ok(())
}

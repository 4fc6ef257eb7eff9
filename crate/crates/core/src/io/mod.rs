//! File formats: PLY and OBJ geometry, PNG frames, JSON records and the
//! dataset directory layout.

mod dataset;
mod image;
mod obj;
mod ply;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::labeling::BoundaryLoop;

pub use dataset::{frame_path, write_frame, write_intrinsics, Dataset, IntrinsicsFile, FRAMES_DIR, INTRINSICS_FILE};
pub use image::{read_color_png, read_depth_png, read_mask_png, write_color_png, write_depth_png, write_mask_png};
pub use obj::{mesh_to_obj, read_mesh_obj, write_mesh_obj};
pub use ply::{read_cloud_ply, read_mesh_ply, write_cloud_ply, write_loop_ply, write_mesh_ply, PlyEncoding};

pub(crate) fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_string(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_loop_json(path: &Path, l: &BoundaryLoop) -> Result<()> {
    write_json(path, &l.to_json_points())
}

pub fn read_loop_json(path: &Path) -> Result<BoundaryLoop> {
    let pts: Vec<[f64; 3]> = read_json(path)?;
    BoundaryLoop::new(pts.into_iter().map(nalgebra::Point3::from).collect()).map_err(|e| Error::format(path, e.to_string()))
}

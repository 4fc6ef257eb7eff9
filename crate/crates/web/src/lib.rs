//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export wraps a plain function returning a core `Result`, so the
//! same code is tested natively.

use std::f64::consts::PI;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;
use woundmesh::labeling::{savitzky_golay_smooth, BoundaryLoop};
use woundmesh::measure::{measure_region, perimeter, MeasureConfig, MeasurementReport};
use woundmesh::meshing::TriangleMesh;
use woundmesh::synth::{
    analytic_measurements, default_intrinsics, orbit_pose, render_frame, Crater, RenderOptions, SceneSpec,
    SyntheticScene, SYNTH_DEPTH_SCALE,
};
use woundmesh::Result;

fn js(e: woundmesh::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

#[wasm_bindgen]
pub fn frame_width() -> usize {
    default_intrinsics().width
}

#[wasm_bindgen]
pub fn frame_height() -> usize {
    default_intrinsics().height
}

/// Depth of the phantom seen from an orbit pose, as RGBA: near is bright,
/// the labelled region is tinted red, missing depth is black.
pub fn depth_rgba(elevation_deg: f64, azimuth_deg: f64, distance_mm: f64, sigma_mm: f64) -> Result<Vec<u8>> {
    let scene = SyntheticScene::phantom();
    let opts = RenderOptions {
        depth_noise_sigma: sigma_mm,
        ..Default::default()
    };
    let frame = render_frame(
        &scene,
        &orbit_pose(elevation_deg, azimuth_deg, distance_mm),
        &default_intrinsics(),
        &opts,
    )?;
    let depths: Vec<f64> = frame
        .depth
        .data
        .iter()
        .filter(|&&d| d > 0)
        .map(|&d| d as f64 * SYNTH_DEPTH_SCALE)
        .collect();
    let lo = depths.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = depths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-9);
    let mut out = Vec::with_capacity(4 * frame.depth.data.len());
    for (i, &d) in frame.depth.data.iter().enumerate() {
        if d == 0 {
            out.extend_from_slice(&[0, 0, 0, 255]);
            continue;
        }
        let g = 40.0 + 215.0 * (1.0 - (d as f64 * SYNTH_DEPTH_SCALE - lo) / span);
        let roi = frame.mask.as_ref().is_some_and(|m| m.data[i] == 1);
        let (r, gb) = if roi { (g, 0.55 * g) } else { (g, g) };
        out.extend_from_slice(&[r as u8, gb as u8, gb as u8, 255]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn render_depth(elevation_deg: f64, azimuth_deg: f64, distance_mm: f64, sigma_mm: f64) -> Result<Vec<u8>, JsError> {
    depth_rgba(elevation_deg, azimuth_deg, distance_mm, sigma_mm).map_err(js)
}

#[derive(Debug, Serialize)]
pub struct SmoothedLoop {
    pub raw: Vec<[f64; 3]>,
    pub smoothed: Vec<[f64; 3]>,
    pub raw_perimeter_mm: f64,
    pub smoothed_perimeter_mm: f64,
    pub true_perimeter_mm: f64,
}

/// A 20 mm circle of `n` vertices with uniform radial jitter, before and
/// after Savitzky-Golay smoothing.
pub fn noisy_circle(n: usize, jitter_mm: f64, window: usize, order: usize, seed: u64) -> Result<SmoothedLoop> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = 20.0;
    let verts = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            let rr = r + jitter_mm * rng.random_range(-1.0..=1.0);
            Point3::new(rr * t.cos(), rr * t.sin(), 0.0)
        })
        .collect();
    let raw = BoundaryLoop::new(verts)?;
    let smoothed = savitzky_golay_smooth(&raw, window, order)?;
    let samples = 10 * n;
    Ok(SmoothedLoop {
        raw_perimeter_mm: perimeter(&raw, samples)?,
        smoothed_perimeter_mm: perimeter(&smoothed, samples)?,
        true_perimeter_mm: 2.0 * PI * r,
        raw: raw.to_json_points(),
        smoothed: smoothed.to_json_points(),
    })
}

/// JSON of [`SmoothedLoop`].
#[wasm_bindgen]
pub fn smooth_loop(n: usize, jitter_mm: f64, window: usize, order: usize, seed: u64) -> Result<String, JsError> {
    noisy_circle(n, jitter_mm, window, order, seed).map(|l| to_json(&l)).map_err(js)
}

#[derive(Debug, Serialize)]
pub struct CraterMeasurement {
    pub measured: MeasurementReport,
    pub analytic: MeasurementReport,
    pub vertices: usize,
}

/// Measures a crater on an exactly labelled height-field mesh with the given
/// grid spacing and compares with the closed form.
pub fn crater_measurement(rim_radius_mm: f64, depth_mm: f64, spacing_mm: f64) -> Result<CraterMeasurement> {
    if !(spacing_mm >= 0.1) {
        return Err(woundmesh::Error::InvalidInput("spacing must be at least 0.1 mm".into()));
    }
    let scene = SyntheticScene::new(SceneSpec {
        craters: vec![Crater {
            center: [0.0, 0.0],
            rim_radius: rim_radius_mm,
            depth: depth_mm,
        }],
        markers: Vec::new(),
        half_extent: rim_radius_mm * 2.0,
        ..Default::default()
    })?;
    let half = 1.5 * rim_radius_mm;
    let n = (2.0 * half / spacing_mm).round() as usize + 1;
    let step = 2.0 * half / (n - 1) as f64;
    let mut vertices = Vec::with_capacity(n * n);
    let mut labels = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (-half + i as f64 * step, -half + j as f64 * step);
            vertices.push(Point3::new(x, y, scene.height(x, y).unwrap_or(0.0)));
            labels.push(scene.in_region(x, y) as u32);
        }
    }
    let mut faces = Vec::with_capacity(2 * (n - 1) * (n - 1));
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            let v = i * n + j;
            faces.push([v, v + n, v + n + 1]);
            faces.push([v, v + n + 1, v + 1]);
        }
    }
    let mut mesh = TriangleMesh::new(vertices, faces);
    mesh.vertex_labels = Some(labels);
    Ok(CraterMeasurement {
        measured: measure_region(&mesh, &MeasureConfig::default())?,
        analytic: analytic_measurements(&scene)?,
        vertices: n * n,
    })
}

/// JSON of [`CraterMeasurement`].
#[wasm_bindgen]
pub fn measure_crater(rim_radius_mm: f64, depth_mm: f64, spacing_mm: f64) -> Result<String, JsError> {
    crater_measurement(rim_radius_mm, depth_mm, spacing_mm)
        .map(|m| to_json(&m))
        .map_err(js)
}

//! Analytic height-field scenes and a ray-casting RGB-D renderer.
//!
//! World coordinates are millimetres with the base plane at `z = 0` and the
//! camera above it. Poses are camera-to-world.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::measure::MeasurementReport;
use crate::rgbd::{CameraIntrinsics, ColorImage, DepthImage, LabelMask, MarkerObservation, RgbdFrame};
use crate::transform::RigidTransform;

/// Spherical-cap depression in the base plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crater {
    pub center: [f64; 2],
    pub rim_radius: f64,
    pub depth: f64,
}

impl Crater {
    /// Radius of the sphere the cap is cut from; `None` for a flat crater.
    pub fn sphere_radius(&self) -> Option<f64> {
        let (r, h) = (self.rim_radius, self.depth);
        (h > 0.0).then(|| (r * r + h * h) / (2.0 * h))
    }

    fn rho2(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        dx * dx + dy * dy
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.rho2(x, y) < self.rim_radius * self.rim_radius
    }

    /// Height offset (≤ 0) at `(x, y)`.
    pub fn height(&self, x: f64, y: f64) -> f64 {
        let Some(big_r) = self.sphere_radius() else {
            return 0.0;
        };
        let rho2 = self.rho2(x, y);
        if rho2 >= self.rim_radius * self.rim_radius {
            return 0.0;
        }
        (big_r - self.depth) - (big_r * big_r - rho2).sqrt()
    }

    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let Some(big_r) = self.sphere_radius() else {
            return [0.0; 2];
        };
        let rho2 = self.rho2(x, y);
        if rho2 >= self.rim_radius * self.rim_radius {
            return [0.0; 2];
        }
        let s = 1.0 / (big_r * big_r - rho2).sqrt();
        [(x - self.center[0]) * s, (y - self.center[1]) * s]
    }
}

/// Square fiducial painted on the base plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerSpec {
    pub id: i64,
    pub center: [f64; 2],
    pub side: f64,
    /// In-plane rotation in radians.
    pub angle: f64,
}

impl MarkerSpec {
    /// Outer corners, counter-clockwise in world `(x, y)`.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let h = 0.5 * self.side;
        let (s, c) = self.angle.sin_cos();
        [[-h, -h], [h, -h], [h, h], [-h, h]]
            .map(|[u, v]| [self.center[0] + c * u - s * v, self.center[1] + s * u + c * v])
    }

    /// Marker-local coordinates in `[0, 1)²` if `(x, y)` lies on the marker.
    fn local(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let u = (c * dx + s * dy) / self.side + 0.5;
        let v = (-s * dx + c * dy) / self.side + 0.5;
        ((0.0..1.0).contains(&u) && (0.0..1.0).contains(&v)).then_some((u, v))
    }

    /// 7x7 cell pattern: black border, id-dependent interior bits.
    fn is_dark(&self, u: f64, v: f64) -> bool {
        let (i, j) = ((u * 7.0) as i64, (v * 7.0) as i64);
        if i == 0 || j == 0 || i == 6 || j == 6 {
            return true;
        }
        let bit = (i - 1) * 5 + (j - 1);
        let code = (self.id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x5555_5555;
        (code >> (bit % 64)) & 1 == 1
    }
}

/// Serializable scene description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    /// The base plane spans `[-half_extent, half_extent]²`.
    pub half_extent: f64,
    pub craters: Vec<Crater>,
    pub markers: Vec<MarkerSpec>,
    /// Index into `craters` of the labelled region.
    pub region_crater: usize,
    pub textured: bool,
    pub texture_seed: u64,
    pub texture_wavelength_mm: f64,
    pub texture_octaves: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            half_extent: 75.0,
            craters: vec![Crater {
                center: [0.0, 0.0],
                rim_radius: 20.0,
                depth: 5.0,
            }],
            markers: vec![
                MarkerSpec {
                    id: 3,
                    center: [-50.0, 35.0],
                    side: 13.0,
                    angle: 0.2,
                },
                MarkerSpec {
                    id: 7,
                    center: [50.0, -35.0],
                    side: 13.0,
                    angle: -0.3,
                },
            ],
            region_crater: 0,
            textured: true,
            texture_seed: 1,
            texture_wavelength_mm: 24.0,
            texture_octaves: 4,
        }
    }
}

/// Seeded 2D value noise with quintic interpolation.
#[derive(Debug, Clone)]
struct ValueNoise {
    perm: [u8; 512],
    values: [f64; 256],
}

impl ValueNoise {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p: Vec<u8> = (0..=255).collect();
        for i in (1..256).rev() {
            let j = rng.random_range(0..=i);
            p.swap(i, j);
        }
        let mut perm = [0u8; 512];
        for i in 0..512 {
            perm[i] = p[i & 255];
        }
        let mut values = [0.0; 256];
        for v in &mut values {
            *v = rng.random::<f64>();
        }
        Self { perm, values }
    }

    fn lattice(&self, ix: i64, iy: i64) -> f64 {
        let a = self.perm[(ix & 255) as usize] as usize;
        self.values[self.perm[a + (iy & 255) as usize] as usize]
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let (fx, fy) = (x.floor(), y.floor());
        let (ix, iy) = (fx as i64, fy as i64);
        let fade = |t: f64| t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
        let (tx, ty) = (fade(x - fx), fade(y - fy));
        let a = self.lattice(ix, iy) + tx * (self.lattice(ix + 1, iy) - self.lattice(ix, iy));
        let b = self.lattice(ix, iy + 1)
            + tx * (self.lattice(ix + 1, iy + 1) - self.lattice(ix, iy + 1));
        a + ty * (b - a)
    }
}

const SKIN: [f64; 3] = [226.0, 182.0, 160.0];
const BED: [f64; 3] = [96.0, 38.0, 40.0];
const INK: [u8; 3] = [20, 20, 20];
const PAPER: [u8; 3] = [240, 240, 240];
const FLAT: [u8; 3] = [180, 140, 130];

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    spec: SceneSpec,
    noise: ValueNoise,
    min_height: f64,
}

impl SyntheticScene {
    pub fn new(spec: SceneSpec) -> Result<Self> {
        if !(spec.half_extent > 0.0) {
            return Err(Error::invalid("half_extent must be positive"));
        }
        for c in &spec.craters {
            if !(c.rim_radius > 0.0) || !(c.depth >= 0.0) {
                return Err(Error::invalid("crater rim radius must be > 0, depth >= 0"));
            }
        }
        if spec.region_crater >= spec.craters.len() {
            return Err(Error::invalid("region_crater out of range"));
        }
        if !(spec.texture_wavelength_mm > 0.0) || spec.texture_octaves == 0 {
            return Err(Error::invalid("texture needs a positive wavelength and >= 1 octave"));
        }
        let min_height = -spec.craters.iter().map(|c| c.depth).sum::<f64>();
        Ok(Self {
            noise: ValueNoise::new(spec.texture_seed),
            spec,
            min_height,
        })
    }

    /// The default phantom: 150 mm plane, one crater (rim 20 mm, depth 5 mm),
    /// two 13 mm markers on opposite sides.
    pub fn phantom() -> Self {
        Self::new(SceneSpec::default()).expect("default scene is valid")
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    pub fn in_domain(&self, x: f64, y: f64) -> bool {
        let e = self.spec.half_extent;
        x.abs() <= e && y.abs() <= e
    }

    /// Surface height; `None` off the base plane.
    pub fn height(&self, x: f64, y: f64) -> Option<f64> {
        self.in_domain(x, y)
            .then(|| self.spec.craters.iter().map(|c| c.height(x, y)).sum())
    }

    /// Upward unit normal.
    pub fn normal(&self, x: f64, y: f64) -> Vector3<f64> {
        let g = self.spec.craters.iter().fold([0.0; 2], |acc, c| {
            let d = c.gradient(x, y);
            [acc[0] + d[0], acc[1] + d[1]]
        });
        Vector3::new(-g[0], -g[1], 1.0).normalize()
    }

    pub fn in_region(&self, x: f64, y: f64) -> bool {
        self.spec.craters[self.spec.region_crater].contains(x, y)
    }

    /// Texture in `[0, 1]`, stretched to cover most of the range.
    pub fn texture(&self, x: f64, y: f64) -> f64 {
        let mut sum = 0.0;
        let mut norm = 0.0;
        let mut amp = 1.0;
        let mut freq = 1.0 / self.spec.texture_wavelength_mm;
        for o in 0..self.spec.texture_octaves {
            // offset octaves so lattice points do not line up
            let off = 17.31 * o as f64;
            sum += amp * self.noise.at(x * freq + off, y * freq - off);
            norm += amp;
            amp *= 0.5;
            freq *= 2.0;
        }
        ((sum / norm - 0.5) * 2.6 + 0.5).clamp(0.0, 1.0)
    }

    pub fn color(&self, x: f64, y: f64) -> [u8; 3] {
        for m in &self.spec.markers {
            if let Some((u, v)) = m.local(x, y) {
                return if m.is_dark(u, v) { INK } else { PAPER };
            }
        }
        if !self.spec.textured {
            return FLAT;
        }
        let t = self.texture(x, y);
        [0, 1, 2].map(|c| (SKIN[c] + t * (BED[c] - SKIN[c])).round() as u8)
    }

    /// First intersection of `origin + s * dir` with the surface, as the ray
    /// parameter `s`.
    pub fn cast_ray(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        const STEP: f64 = 0.25;
        const TOL: f64 = 1e-7;
        if !(dir.z < 0.0) || origin.z <= 0.0 {
            return None;
        }
        let s_top = -origin.z / dir.z;
        let s_bot = (self.min_height - 1e-6 - origin.z) / dir.z;
        let g = |s: f64| -> Option<f64> {
            let p = origin + dir * s;
            self.height(p.x, p.y).map(|f| p.z - f)
        };
        let mut lo = s_top;
        let mut g_lo = g(lo)?;
        if g_lo <= 0.0 {
            return Some(lo);
        }
        let len = dir.norm();
        let n = ((s_bot - s_top) * len / STEP).ceil().max(1.0) as usize;
        let ds = (s_bot - s_top) / n as f64;
        for i in 1..=n {
            let hi = s_top + ds * i as f64;
            let g_hi = g(hi)?;
            if g_hi <= 0.0 {
                let mut hi = hi;
                while (hi - lo) * len > TOL {
                    let mid = 0.5 * (lo + hi);
                    match g(mid) {
                        Some(v) if v > 0.0 => lo = mid,
                        Some(_) => hi = mid,
                        None => return None,
                    }
                }
                // linear interpolation inside the final bracket
                let (a, b) = (g(lo).unwrap_or(g_lo), g(hi).unwrap_or(0.0));
                return Some(if a - b > 0.0 { lo + (hi - lo) * a / (a - b) } else { hi });
            }
            lo = hi;
            g_lo = g_hi;
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderOptions {
    /// Standard deviation of depth noise in mm, truncated at 3σ.
    pub depth_noise_sigma: f64,
    /// Millimetres per raw depth unit.
    pub depth_scale: f64,
    pub noise_seed: u64,
    pub timestamp_index: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            depth_noise_sigma: 0.0,
            depth_scale: SYNTH_DEPTH_SCALE,
            noise_seed: 0,
            timestamp_index: 0,
        }
    }
}

/// Depth unit of rendered frames (mm per raw unit).
pub const SYNTH_DEPTH_SCALE: f64 = 0.05;

/// Default synthetic camera: VGA, 600 px focal length.
pub fn default_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(600.0, 600.0, 319.5, 239.5, 640, 480).expect("valid intrinsics")
}

fn truncated_normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    loop {
        let n: f64 = rng.sample(StandardNormal);
        if n.abs() <= 3.0 {
            return n * sigma;
        }
    }
}

/// Box-filtered colour over a 3x3 grid of sub-pixel rays, as a sensor
/// integrates over the pixel footprint. Sub-rays that miss are ignored.
fn pixel_color(
    scene: &SyntheticScene,
    pose: &RigidTransform,
    k: &CameraIntrinsics,
    origin: &Point3<f64>,
    x: usize,
    y: usize,
) -> Option<[u8; 3]> {
    let mut acc = [0.0; 3];
    let mut n = 0.0;
    for j in [-1.0, 0.0, 1.0] {
        for i in [-1.0, 0.0, 1.0] {
            let (u, v) = (x as f64 + i / 3.0, y as f64 + j / 3.0);
            let dir = pose.apply_vector(&Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0));
            if let Some(s) = scene.cast_ray(origin, &dir) {
                let p = origin + dir * s;
                let c = scene.color(p.x, p.y);
                for ch in 0..3 {
                    acc[ch] += c[ch] as f64;
                }
                n += 1.0;
            }
        }
    }
    (n > 0.0).then(|| acc.map(|a| (a / n).round() as u8))
}

/// Ray-casts every pixel. `pose` maps camera coordinates to world.
pub fn render_frame(
    scene: &SyntheticScene,
    pose: &RigidTransform,
    intrinsics: &CameraIntrinsics,
    options: &RenderOptions,
) -> Result<RgbdFrame> {
    intrinsics.validate()?;
    if !(options.depth_scale > 0.0) || !(options.depth_noise_sigma >= 0.0) {
        return Err(Error::invalid("depth_scale must be > 0 and sigma >= 0"));
    }
    let k = intrinsics;
    let (w, h) = (k.width, k.height);
    let mut depth = DepthImage::filled(w, h, 0);
    let mut color = ColorImage::filled(w, h, [0; 3]);
    let mut mask = LabelMask::filled(w, h, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(
        options.noise_seed ^ (options.timestamp_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    let origin = Point3::from(pose.translation);
    let mut hits = 0usize;
    for y in 0..h {
        for x in 0..w {
            let dc = Vector3::new((x as f64 - k.cx) / k.fx, (y as f64 - k.cy) / k.fy, 1.0);
            let dir = pose.apply_vector(&dc);
            let Some(s) = scene.cast_ray(&origin, &dir) else {
                continue;
            };
            let p = origin + dir * s;
            let z = s + truncated_normal(&mut rng, options.depth_noise_sigma);
            let raw = (z / options.depth_scale).round();
            if !(1.0..=65535.0).contains(&raw) {
                continue;
            }
            hits += 1;
            depth.set(x, y, raw as u16);
            color.set(x, y, pixel_color(scene, pose, k, &origin, x, y).unwrap_or(scene.color(p.x, p.y)));
            if scene.in_region(p.x, p.y) {
                mask.set(x, y, 1);
            }
        }
    }
    if hits == 0 {
        return Err(Error::EmptyFrame);
    }
    let world_to_cam = pose.inverse();
    let markers = scene
        .spec
        .markers
        .iter()
        .filter_map(|m| {
            let mut corners = [[0.0; 2]; 4];
            for (c, xy) in corners.iter_mut().zip(m.corners()) {
                let pc = world_to_cam.apply(&Point3::new(xy[0], xy[1], 0.0));
                if pc.z <= 0.0 {
                    return None;
                }
                let u = k.fx * pc.x / pc.z + k.cx;
                let v = k.fy * pc.y / pc.z + k.cy;
                if !k.contains(u, v) {
                    return None;
                }
                *c = [u, v];
            }
            Some(MarkerObservation {
                id: m.id,
                corners,
            })
        })
        .collect();
    RgbdFrame::new(color, depth, *k, options.timestamp_index)?
        .with_mask(mask)?
        .with_markers(markers)
}

/// `n` points uniform over the base plane, lifted to the surface, with
/// analytic upward normals.
pub fn sample_ground_truth(scene: &SyntheticScene, n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = scene.spec.half_extent;
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.random_range(-e..=e);
        let y = rng.random_range(-e..=e);
        let z = scene.height(x, y).unwrap_or(0.0);
        points.push(Point3::new(x, y, z));
        normals.push(scene.normal(x, y));
        labels.push(scene.in_region(x, y) as u32);
    }
    let mut cloud = PointCloud::from_points(points);
    cloud.normals = Some(normals);
    cloud.labels = Some(labels);
    cloud
}

/// Closed-form measurements of the labelled crater.
pub fn analytic_measurements(scene: &SyntheticScene) -> Result<MeasurementReport> {
    let spec = &scene.spec;
    let region = spec.craters[spec.region_crater];
    for (i, c) in spec.craters.iter().enumerate() {
        let d = ((c.center[0] - region.center[0]).powi(2) + (c.center[1] - region.center[1]).powi(2))
            .sqrt();
        if i != spec.region_crater && d < c.rim_radius + region.rim_radius {
            return Err(Error::UnsupportedOracle(
                "region crater overlaps another crater".into(),
            ));
        }
    }
    let e = spec.half_extent;
    if region.center[0].abs() + region.rim_radius > e || region.center[1].abs() + region.rim_radius > e {
        return Err(Error::UnsupportedOracle("region crater leaves the base plane".into()));
    }
    let (r, h) = (region.rim_radius, region.depth);
    let area = match region.sphere_radius() {
        Some(big_r) => 2.0 * PI * big_r * h,
        None => PI * r * r,
    };
    let mut dims = [2.0 * r, 2.0 * r, h];
    dims.sort_by(|a, b| b.total_cmp(a));
    Ok(MeasurementReport {
        perimeter_mm: 2.0 * PI * r,
        surface_area_mm2: area,
        height_mm: dims[0],
        width_mm: dims[1],
        depth_mm: dims[2],
        loop_vertex_count: 0,
        region_face_count: 0,
    })
}

/// Camera on a sphere around the world origin, looking at it: tilted by
/// `elevation_deg` about world X, then `azimuth_deg` about world Y, at
/// `distance` mm. Image rows run along world -Y at zero tilt.
pub fn orbit_pose(elevation_deg: f64, azimuth_deg: f64, distance: f64) -> RigidTransform {
    let tilt = Rotation3::from_axis_angle(&Vector3::y_axis(), azimuth_deg.to_radians())
        * Rotation3::from_axis_angle(&Vector3::x_axis(), elevation_deg.to_radians());
    let base = Rotation3::from_matrix_unchecked(Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)));
    RigidTransform::new(tilt * base, tilt * Vector3::new(0.0, 0.0, distance))
}

/// The reference viewpoint: straight down from 450 mm.
pub fn reference_pose() -> RigidTransform {
    orbit_pose(0.0, 0.0, 450.0)
}

/// Uniform draw from the capture envelope: ±30° in both tilts, 400–500 mm.
pub fn random_envelope_pose(rng: &mut impl Rng) -> RigidTransform {
    orbit_pose(
        rng.random_range(-30.0..=30.0),
        rng.random_range(-30.0..=30.0),
        rng.random_range(400.0..=500.0),
    )
}

/// A hand-held sweep of `n` poses across the envelope.
pub fn sweep_poses(n: usize) -> Vec<RigidTransform> {
    (0..n)
        .map(|i| {
            let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 };
            orbit_pose(
                -20.0 + 40.0 * t,
                15.0 * (2.0 * PI * t).sin(),
                450.0 + 30.0 * (PI * t).cos(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rgbd::back_project;

    #[test]
    fn top_down_plane_has_constant_depth() {
        let spec = SceneSpec {
            craters: vec![Crater {
                center: [0.0, 0.0],
                rim_radius: 10.0,
                depth: 0.0,
            }],
            ..Default::default()
        };
        let scene = SyntheticScene::new(spec).unwrap();
        let k = CameraIntrinsics::new(600.0, 600.0, 32.0, 24.0, 64, 48).unwrap();
        let f = render_frame(&scene, &orbit_pose(0.0, 0.0, 450.0), &k, &RenderOptions::default())
            .unwrap();
        let want = (450.0 / SYNTH_DEPTH_SCALE) as u16;
        assert!(f.depth.data.iter().all(|&d| d == want));
        assert_eq!(*f.depth.get(32, 24), want);
    }

    #[test]
    fn back_projection_lies_on_the_surface() {
        let scene = SyntheticScene::phantom();
        let k = default_intrinsics().halved();
        for pose in [reference_pose(), orbit_pose(20.0, -15.0, 420.0)] {
            let f = render_frame(&scene, &pose, &k, &RenderOptions::default()).unwrap();
            let cloud = back_project(&f, SYNTH_DEPTH_SCALE, (0.0, 2000.0)).unwrap();
            assert!(cloud.len() > 1000);
            for p in &cloud.points {
                let q = pose.apply(p);
                let f = scene.height(q.x, q.y).unwrap_or(0.0);
                assert!((q.z - f).abs() <= 0.05, "{} vs {}", q.z, f);
            }
        }
    }

    #[test]
    fn looking_away_is_an_empty_frame() {
        let k = default_intrinsics().halved();
        let up = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 450.0));
        assert!(matches!(
            render_frame(&SyntheticScene::phantom(), &up, &k, &RenderOptions::default()),
            Err(Error::EmptyFrame)
        ));
    }

    #[test]
    fn ground_truth_reaches_the_crater_floor() {
        let scene = SyntheticScene::phantom();
        let gt = sample_ground_truth(&scene, 1_000_000, 7);
        let min = gt.points.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
        assert!((min + 5.0).abs() < 0.1);
        assert_eq!(gt.points[..10], sample_ground_truth(&scene, 10, 7).points[..]);
    }

    #[test]
    fn pure_plane_samples() {
        let spec = SceneSpec {
            craters: vec![Crater {
                center: [0.0, 0.0],
                rim_radius: 10.0,
                depth: 0.0,
            }],
            ..Default::default()
        };
        let gt = sample_ground_truth(&SyntheticScene::new(spec).unwrap(), 500, 1);
        assert!(gt.points.iter().all(|p| p.z == 0.0));
        assert!(gt.normals.unwrap().iter().all(|n| *n == Vector3::z()));
    }

    #[test]
    fn analytic_crater_values() {
        let m = analytic_measurements(&SyntheticScene::phantom()).unwrap();
        assert!((m.perimeter_mm - 125.664).abs() < 1e-3);
        assert!((m.surface_area_mm2 - 1335.18).abs() < 1e-2);
        assert_eq!((m.height_mm, m.width_mm, m.depth_mm), (40.0, 40.0, 5.0));

        let flat = SceneSpec {
            craters: vec![Crater {
                center: [0.0, 0.0],
                rim_radius: 20.0,
                depth: 0.0,
            }],
            ..Default::default()
        };
        let m = analytic_measurements(&SyntheticScene::new(flat).unwrap()).unwrap();
        assert!((m.surface_area_mm2 - PI * 400.0).abs() < 1e-9);
        assert_eq!(m.depth_mm, 0.0);
    }

    #[test]
    fn overlapping_craters_have_no_oracle() {
        let mut spec = SceneSpec::default();
        spec.craters.push(Crater {
            center: [10.0, 0.0],
            rim_radius: 5.0,
            depth: 1.0,
        });
        let scene = SyntheticScene::new(spec).unwrap();
        assert!(matches!(
            analytic_measurements(&scene),
            Err(Error::UnsupportedOracle(_))
        ));
    }

    #[test]
    fn envelope_keeps_the_region_in_view() {
        let scene = SyntheticScene::phantom();
        let k = default_intrinsics().halved();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for pose in sweep_poses(12)
            .into_iter()
            .chain((0..8).map(|_| random_envelope_pose(&mut rng)))
        {
            let f = render_frame(&scene, &pose, &k, &RenderOptions::default()).unwrap();
            assert!(f.mask.as_ref().unwrap().data.iter().any(|&m| m == 1));
            assert_eq!(f.marker_corners.as_ref().unwrap().len(), 2);
        }
    }

    #[test]
    fn texture_spans_the_range() {
        let scene = SyntheticScene::phantom();
        let vals: Vec<f64> = (0..200)
            .flat_map(|i| (0..200).map(move |j| (i as f64 * 0.7 - 70.0, j as f64 * 0.7 - 70.0)))
            .map(|(x, y)| scene.texture(x, y))
            .collect();
        let lo = vals.iter().cloned().fold(1.0, f64::min);
        let hi = vals.iter().cloned().fold(0.0, f64::max);
        assert!(hi - lo >= 0.3);
    }
}

//! Dense RGB-D odometry.
//!
//! Minimises, over `T` mapping source camera coordinates into the target
//! camera, the weighted sum
//!
//! ```text
//! E(T) = (1 - λ) Σ (I_t(p') - I_s(p))² + λ Σ (D_t(p') - [T P(p)]_z)²
//! ```
//!
//! where `P(p)` lifts source pixel `p` with its depth and `p'` projects `T P`
//! into the target. Intensities are luma in `[0, 1]`; the depth residual is
//! computed in millimetres and weighted in centimetres (see [`GEOMETRIC_SCALE`]).
//!
//! Target images are sampled with a Catmull-Rom cubic: its tangents at pixel
//! centres are the central differences, and the interpolant is C¹ so the
//! analytic Jacobians agree with finite differences. Where the cubic stencil
//! touches missing depth the sample falls back to renormalised bilinear and
//! the pixel contributes to the energy only.
//!
//! A source pixel whose projection is unusable (behind the camera, outside
//! the image, on missing target depth) or whose depth residual exceeds
//! `max_depth_diff` contributes the truncation cost `λ δ² + (1 - λ)` with
//! `δ = max_depth_diff` instead of its residuals, so energies at different
//! poses stay comparable and step acceptance is monotone.

use nalgebra::{Matrix6, Point3, Rotation3, Unit, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::cloud::{covariance, sorted_eigen};
use crate::error::{Error, Result};
use crate::rgbd::{CameraIntrinsics, RgbdFrame};
use crate::transform::RigidTransform;

/// Luma weights for RGB → grayscale.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// The geometric residual enters the energy in metres, the unit the
/// photometric/geometric balance `λ` is customarily tuned for; in
/// millimetres the depth term would outweigh intensity by ~10⁶.
pub const GEOMETRIC_SCALE: f64 = 1e-2;

const MAX_HALVINGS: usize = 8;
const MIN_RESIDUALS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdometryConfig {
    /// Weight of the geometric term, in `[0, 1]`.
    pub lambda: f64,
    pub pyramid_levels: usize,
    pub max_iterations_per_level: usize,
    /// Relative energy decrease below which a level stops.
    pub convergence_eps: f64,
    /// Depth residual gate in mm.
    pub max_depth_diff: f64,
    /// Millimetres per raw depth unit.
    pub depth_scale: f64,
    /// Try centroid/normal pre-alignment candidates at the coarsest level
    /// and start from the lowest-energy one.
    pub prealign: bool,
}

impl Default for OdometryConfig {
    fn default() -> Self {
        Self {
            lambda: 0.9,
            pyramid_levels: 3,
            max_iterations_per_level: 30,
            convergence_eps: 1e-6,
            max_depth_diff: 30.0,
            depth_scale: 1.0,
            prealign: true,
        }
    }
}

impl OdometryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid(format!("lambda {} not in [0, 1]", self.lambda)));
        }
        if self.pyramid_levels < 1 {
            return Err(Error::invalid("pyramid_levels must be >= 1"));
        }
        if !(self.max_depth_diff > 0.0) || !(self.depth_scale > 0.0) {
            return Err(Error::invalid(
                "max_depth_diff and depth_scale must be positive",
            ));
        }
        if !(self.convergence_eps >= 0.0) {
            return Err(Error::invalid("convergence_eps must be >= 0"));
        }
        Ok(())
    }

    fn truncation_cost(&self) -> f64 {
        let d = self.max_depth_diff * GEOMETRIC_SCALE;
        self.lambda * d * d + (1.0 - self.lambda)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdometryResult {
    pub transform: RigidTransform,
    /// Energy at full resolution for the returned transform.
    pub final_energy: f64,
    pub initial_energy: f64,
    pub converged: bool,
    /// Pixels inside the gate at full resolution.
    pub inliers: usize,
    pub iterations: usize,
}

/// One image level: grayscale intensity and depth (mm, 0 = missing).
#[derive(Debug, Clone)]
struct Level {
    k: CameraIntrinsics,
    gray: Vec<f64>,
    depth: Vec<f64>,
}

impl Level {
    fn from_frame(frame: &RgbdFrame, depth_scale: f64) -> Self {
        let gray = frame
            .color
            .data
            .iter()
            .map(|c| (LUMA[0] * c[0] as f64 + LUMA[1] * c[1] as f64 + LUMA[2] * c[2] as f64) / 255.0)
            .collect();
        let depth = frame
            .depth
            .data
            .iter()
            .map(|&d| d as f64 * depth_scale)
            .collect();
        Self {
            k: frame.intrinsics,
            gray,
            depth,
        }
    }

    /// 2x downsampling: box-averaged intensity, median of valid depths.
    fn halved(&self) -> Self {
        let k = self.k.halved();
        let (w, w2, h2) = (self.k.width, k.width, k.height);
        let mut gray = vec![0.0; w2 * h2];
        let mut depth = vec![0.0; w2 * h2];
        let mut block = [0.0f64; 4];
        for y in 0..h2 {
            for x in 0..w2 {
                let taps = [
                    (2 * y) * w + 2 * x,
                    (2 * y) * w + 2 * x + 1,
                    (2 * y + 1) * w + 2 * x,
                    (2 * y + 1) * w + 2 * x + 1,
                ];
                gray[y * w2 + x] = taps.iter().map(|&i| self.gray[i]).sum::<f64>() / 4.0;
                let mut n = 0;
                for &i in &taps {
                    if self.depth[i] > 0.0 {
                        block[n] = self.depth[i];
                        n += 1;
                    }
                }
                depth[y * w2 + x] = median(&mut block[..n]);
            }
        }
        Self { k, gray, depth }
    }
}

fn median(v: &mut [f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        n => {
            v.sort_by(f64::total_cmp);
            if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            }
        }
    }
}

#[inline]
fn catmull_rom(t: f64) -> ([f64; 4], [f64; 4]) {
    let t2 = t * t;
    let t3 = t2 * t;
    (
        [
            0.5 * (-t3 + 2.0 * t2 - t),
            0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
            0.5 * (-3.0 * t3 + 4.0 * t2 + t),
            0.5 * (t3 - t2),
        ],
        [
            0.5 * (-3.0 * t2 + 4.0 * t - 1.0),
            0.5 * (9.0 * t2 - 10.0 * t),
            0.5 * (-9.0 * t2 + 8.0 * t + 1.0),
            0.5 * (3.0 * t2 - 2.0 * t),
        ],
    )
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    value: f64,
    gx: f64,
    gy: f64,
    /// Every tap of the 4x4 stencil was valid, so the gradient is exact.
    full: bool,
}

/// Catmull-Rom sample at continuous `(u, v)` inside the pixel area
/// `[-0.5, w - 0.5) x [-0.5, h - 0.5)`, taps clamped to the image. With
/// `positive` set, zero taps are missing data (depth maps) and a stencil
/// that touches one falls back to [`bilinear_valid`].
fn sample(img: &[f64], w: usize, h: usize, u: f64, v: f64, positive: bool) -> Option<Sample> {
    if !(u >= -0.5 && v >= -0.5 && u < w as f64 - 0.5 && v < h as f64 - 0.5) {
        return None;
    }
    let x0 = u.floor() as i64;
    let y0 = v.floor() as i64;
    let (wx, dwx) = catmull_rom(u - x0 as f64);
    let (wy, dwy) = catmull_rom(v - y0 as f64);
    let clamp = |i: i64, n: usize| i.clamp(0, n as i64 - 1) as usize;
    let xs = [0, 1, 2, 3].map(|i| clamp(x0 + i - 1, w));
    let ys = [0, 1, 2, 3].map(|j| clamp(y0 + j - 1, h));
    let mut value = 0.0;
    let mut gx = 0.0;
    let mut gy = 0.0;
    for j in 0..4 {
        let row = ys[j] * w;
        for i in 0..4 {
            let f = img[row + xs[i]];
            if positive && f <= 0.0 {
                return bilinear_valid(img, w, u - x0 as f64, v - y0 as f64, &xs[1..3], &ys[1..3]);
            }
            value += wx[i] * wy[j] * f;
            gx += dwx[i] * wy[j] * f;
            gy += wx[i] * dwy[j] * f;
        }
    }
    Some(Sample {
        value,
        gx,
        gy,
        full: true,
    })
}

/// Bilinear value over the nonzero taps of a 2x2 cell, weights
/// renormalised. Used where the cubic stencil touches missing depth; the
/// gradient is not reported.
fn bilinear_valid(img: &[f64], w: usize, tx: f64, ty: f64, xs: &[usize], ys: &[usize]) -> Option<Sample> {
    let mut acc = 0.0;
    let mut wsum = 0.0;
    for (j, wy) in [(0, 1.0 - ty), (1, ty)] {
        for (i, wx) in [(0, 1.0 - tx), (1, tx)] {
            let f = img[ys[j] * w + xs[i]];
            let wt = wx * wy;
            if f > 0.0 && wt > 0.0 {
                acc += wt * f;
                wsum += wt;
            }
        }
    }
    (wsum > 0.0).then(|| Sample {
        value: acc / wsum,
        gx: 0.0,
        gy: 0.0,
        full: false,
    })
}

/// Residuals and Jacobians of one source pixel.
///
/// The Jacobians are with respect to the left perturbation
/// `T ← exp([ω, v]) T`, parameter order `(ω_x, ω_y, ω_z, v_x, v_y, v_z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelResidual {
    pub photometric: f64,
    pub geometric: f64,
    pub j_photometric: Vector6<f64>,
    pub j_geometric: Vector6<f64>,
    /// Both target samples had full stencil support.
    pub full_support: bool,
}

/// Outcome for one source pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PixelEval {
    /// Missing source depth; not part of the energy.
    Skipped,
    /// Unusable projection or gated depth residual; costs the truncation value.
    Truncated,
    Inlier(PixelResidual),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyStats {
    pub energy: f64,
    /// Part of `energy` contributed by inlier residuals.
    pub residual_energy: f64,
    pub inliers: usize,
    pub truncated: usize,
}

/// Source/target image pyramids for one odometry problem.
#[derive(Debug, Clone)]
pub struct OdometryProblem {
    source: Vec<Level>,
    target: Vec<Level>,
    config: OdometryConfig,
}

impl OdometryProblem {
    pub fn new(source: &RgbdFrame, target: &RgbdFrame, config: &OdometryConfig) -> Result<Self> {
        config.validate()?;
        source.validate()?;
        target.validate()?;
        if source.intrinsics != target.intrinsics {
            return Err(Error::DimensionMismatch(
                "source and target intrinsics differ".into(),
            ));
        }
        let build = |f: &RgbdFrame| {
            let mut levels = vec![Level::from_frame(f, config.depth_scale)];
            for _ in 1..config.pyramid_levels {
                let next = levels.last().unwrap().halved();
                if next.k.width < 8 || next.k.height < 8 {
                    break;
                }
                levels.push(next);
            }
            levels
        };
        let source = build(source);
        let target = build(target);
        Ok(Self {
            source,
            target,
            config: config.clone(),
        })
    }

    pub fn levels(&self) -> usize {
        self.source.len()
    }

    pub fn config(&self) -> &OdometryConfig {
        &self.config
    }

    pub fn intrinsics(&self, level: usize) -> CameraIntrinsics {
        self.source[level].k
    }

    /// Source depth (mm) at an integer pixel of `level`, 0 if missing.
    pub fn source_depth(&self, level: usize, x: usize, y: usize) -> f64 {
        let l = &self.source[level];
        l.depth[y * l.k.width + x]
    }

    /// Residuals of source pixel `(x, y)` at `level` under `pose`.
    pub fn evaluate_pixel(&self, level: usize, x: usize, y: usize, pose: &RigidTransform) -> PixelEval {
        let src = &self.source[level];
        let tgt = &self.target[level];
        let k = &src.k;
        let idx = y * k.width + x;
        let z = src.depth[idx];
        if z <= 0.0 {
            return PixelEval::Skipped;
        }
        let p = k.unproject(x as f64, y as f64, z);
        let q = pose.apply(&p);
        if q.z <= 0.0 {
            return PixelEval::Truncated;
        }
        let inv_z = 1.0 / q.z;
        let u = k.fx * q.x * inv_z + k.cx;
        let v = k.fy * q.y * inv_z + k.cy;
        let (w, h) = (k.width, k.height);
        let Some(ds) = sample(&tgt.depth, w, h, u, v, true) else {
            return PixelEval::Truncated;
        };
        let r_d = ds.value - q.z;
        if r_d.abs() > self.config.max_depth_diff {
            return PixelEval::Truncated;
        }
        let Some(is) = sample(&tgt.gray, w, h, u, v, false) else {
            return PixelEval::Truncated;
        };
        let r_i = is.value - src.gray[idx];

        // d(u, v)/dQ
        let du = [k.fx * inv_z, 0.0, -k.fx * q.x * inv_z * inv_z];
        let dv = [0.0, k.fy * inv_z, -k.fy * q.y * inv_z * inv_z];
        let (j_i, j_d) = {
            let gi = [
                is.gx * du[0] + is.gy * dv[0],
                is.gx * du[1] + is.gy * dv[1],
                is.gx * du[2] + is.gy * dv[2],
            ];
            let gd = [
                ds.gx * du[0] + ds.gy * dv[0],
                ds.gx * du[1] + ds.gy * dv[1],
                ds.gx * du[2] + ds.gy * dv[2] - 1.0,
            ];
            (chain(&gi, &q), chain(&gd, &q))
        };
        PixelEval::Inlier(PixelResidual {
            photometric: r_i,
            geometric: r_d,
            j_photometric: j_i,
            j_geometric: j_d,
            full_support: ds.full,
        })
    }

    /// Truncated energy at `level`.
    pub fn energy(&self, level: usize, pose: &RigidTransform) -> EnergyStats {
        self.accumulate(level, pose, false).0
    }

    fn accumulate(
        &self,
        level: usize,
        pose: &RigidTransform,
        linearize: bool,
    ) -> (EnergyStats, Matrix6<f64>, Vector6<f64>) {
        let lambda = self.config.lambda;
        let cap = self.config.truncation_cost();
        let k = self.source[level].k;
        let mut stats = EnergyStats {
            energy: 0.0,
            residual_energy: 0.0,
            inliers: 0,
            truncated: 0,
        };
        let mut hess = Matrix6::zeros();
        let mut grad = Vector6::zeros();
        for y in 0..k.height {
            for x in 0..k.width {
                match self.evaluate_pixel(level, x, y, pose) {
                    PixelEval::Skipped => {}
                    PixelEval::Truncated => {
                        stats.energy += cap;
                        stats.truncated += 1;
                    }
                    PixelEval::Inlier(r) => {
                        let rg = r.geometric * GEOMETRIC_SCALE;
                        let e = (1.0 - lambda) * r.photometric * r.photometric + lambda * rg * rg;
                        stats.energy += e;
                        stats.residual_energy += e;
                        stats.inliers += 1;
                        if linearize && r.full_support {
                            let ji = r.j_photometric;
                            let jd = r.j_geometric * GEOMETRIC_SCALE;
                            hess += (1.0 - lambda) * ji * ji.transpose()
                                + lambda * jd * jd.transpose();
                            grad += (1.0 - lambda) * r.photometric * ji
                                + lambda * rg * jd;
                        }
                    }
                }
            }
        }
        (stats, hess, grad)
    }

    /// Gauss-Newton with step halving at one level. Returns the pose, its
    /// energy, whether the level converged and the iteration count.
    fn solve_level(
        &self,
        level: usize,
        start: RigidTransform,
    ) -> (RigidTransform, EnergyStats, bool, usize) {
        let mut pose = start;
        let (mut stats, mut hess, mut grad) = self.accumulate(level, &pose, true);
        let mut converged = false;
        let mut iterations = 0;
        for _ in 0..self.config.max_iterations_per_level {
            iterations += 1;
            let Some(step) = solve_6x6(&hess, &grad) else {
                converged = true;
                break;
            };
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let candidate = pose.perturb_left(&(step * scale));
                let cand = self.accumulate(level, &candidate, true);
                if cand.0.energy <= stats.energy {
                    accepted = Some((candidate, cand));
                    break;
                }
                scale *= 0.5;
            }
            let Some((next, (next_stats, next_hess, next_grad))) = accepted else {
                converged = true;
                break;
            };
            let decrease = stats.energy - next_stats.energy;
            let scale = stats.residual_energy;
            pose = next;
            stats = next_stats;
            hess = next_hess;
            grad = next_grad;
            if decrease <= self.config.convergence_eps * scale.max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        (pose, stats, converged, iterations)
    }
}

/// Row of `g^T dQ/dξ` with `dQ/dξ = [-[Q]x | I]`.
#[inline]
fn chain(g: &[f64; 3], q: &Point3<f64>) -> Vector6<f64> {
    // g^T (-[q]x) = (q x g)^T
    Vector6::new(
        q.y * g[2] - q.z * g[1],
        q.z * g[0] - q.x * g[2],
        q.x * g[1] - q.y * g[0],
        g[0],
        g[1],
        g[2],
    )
}

/// Solves `H ξ = -g`, ignoring directions the data does not constrain.
fn solve_6x6(hess: &Matrix6<f64>, grad: &Vector6<f64>) -> Option<Vector6<f64>> {
    if grad.iter().all(|&g| g == 0.0) {
        return None;
    }
    let svd = hess.svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return None;
    }
    let step = svd.solve(&(-grad), smax * 1e-12).ok()?;
    step.iter().all(|v| v.is_finite()).then_some(step)
}

/// Estimates `T` mapping source camera coordinates into the target camera.
pub fn rgbd_odometry(
    source: &RgbdFrame,
    target: &RgbdFrame,
    config: &OdometryConfig,
    init: &RigidTransform,
) -> Result<OdometryResult> {
    let problem = OdometryProblem::new(source, target, config)?;
    problem.solve(init)
}

impl OdometryProblem {
    pub fn solve(&self, init: &RigidTransform) -> Result<OdometryResult> {
        let coarsest = self.levels() - 1;
        let mut candidates = vec![(*init, self.energy(coarsest, init))];
        if self.config.prealign {
            let mut pre: Vec<_> = self
                .prealign_candidates(coarsest)
                .into_iter()
                .map(|t| (t, self.energy(coarsest, &t)))
                .filter(|(_, e)| e.inliers >= MIN_RESIDUALS)
                .collect();
            pre.sort_by(|a, b| a.1.energy.total_cmp(&b.1.energy));
            pre.truncate(PREALIGN_KEEP);
            candidates.extend(pre);
        }
        if candidates.iter().all(|(_, e)| e.inliers < MIN_RESIDUALS) {
            return Err(Error::InsufficientOverlap {
                valid: candidates[0].1.inliers,
            });
        }

        let mut iterations = 0;
        let mut best: Option<(RigidTransform, f64)> = None;
        for (start, stats) in candidates {
            if stats.inliers < MIN_RESIDUALS {
                continue;
            }
            let (p, e, _, it) = self.solve_level(coarsest, start);
            iterations += it;
            if best.map_or(true, |(_, be)| e.energy < be) {
                best = Some((p, e.energy));
            }
        }
        let mut pose = best.map(|b| b.0).unwrap_or(*init);
        for level in (1..coarsest).rev() {
            let (p, _, _, it) = self.solve_level(level, pose);
            pose = p;
            iterations += it;
        }
        // Finest level starts from whichever of (coarse estimate, init) is
        // better there, so the returned energy never exceeds the initial one.
        let initial = self.energy(0, init);
        if coarsest > 0 && self.energy(0, &pose).energy > initial.energy {
            pose = *init;
        }
        let (pose, stats, converged, it) = if coarsest > 0 {
            self.solve_level(0, pose)
        } else {
            (pose, self.energy(0, &pose), true, 0)
        };
        iterations += it;
        Ok(OdometryResult {
            transform: pose,
            final_energy: stats.energy,
            initial_energy: initial.energy,
            converged,
            inliers: stats.inliers,
            iterations,
        })
    }

    /// Poses aligning the centroids and dominant-plane normals of both
    /// depth maps, swept over rotations about the target normal.
    fn prealign_candidates(&self, level: usize) -> Vec<RigidTransform> {
        let (Some((cs, ns)), Some((ct, nt))) = (
            plane_summary(&self.source[level]),
            plane_summary(&self.target[level]),
        ) else {
            return Vec::new();
        };
        let Some(r0) = Rotation3::rotation_between(&ns, &nt) else {
            return Vec::new();
        };
        let axis = Unit::new_normalize(nt);
        let steps = (PREALIGN_YAW_DEG / PREALIGN_STEP_DEG).round() as i32;
        (-steps..=steps)
            .map(|i| {
                let yaw = (i as f64 * PREALIGN_STEP_DEG).to_radians();
                let r = Rotation3::from_axis_angle(&axis, yaw) * r0;
                RigidTransform::new(r, ct - r * cs)
            })
            .collect()
    }
}

const PREALIGN_YAW_DEG: f64 = 45.0;
const PREALIGN_STEP_DEG: f64 = 3.0;
const PREALIGN_KEEP: usize = 3;

/// Centroid and camera-facing least-variance direction of a level's depth.
fn plane_summary(level: &Level) -> Option<(Vector3<f64>, Vector3<f64>)> {
    let k = &level.k;
    let pts: Vec<Vector3<f64>> = (0..k.height)
        .flat_map(|y| (0..k.width).map(move |x| (x, y)))
        .filter_map(|(x, y)| {
            let z = level.depth[y * k.width + x];
            (z > 0.0).then(|| k.unproject(x as f64, y as f64, z).coords)
        })
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let (c, cov) = covariance(pts.iter().map(|v| Point3::from(*v)));
    let c = c.coords;
    let (_, vecs) = sorted_eigen(&cov);
    let mut n = vecs[0];
    if n.dot(&c) > 0.0 {
        n = -n;
    }
    Some((c, n))
}

use nalgebra::{DMatrix, Point3, Vector2, Vector3, Matrix2};
use serde::{Deserialize, Serialize};

use super::bspline::{basis_values, clamped_uniform_knots, greville, BsplineSurface, TrimMask};
use crate::cloud::{covariance, sorted_eigen, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BsplineFitConfig {
    /// Control points per direction.
    pub grid: (usize, usize),
    pub degree: (usize, usize),
    /// Bending weight relative to the data term (see [`fit_bspline_surface`]).
    pub smoothness: f64,
    /// Re-projection rounds after the initial solve.
    pub iterations: usize,
    /// Trim cells per direction; `None` picks about four points per cell.
    pub trim_resolution: Option<usize>,
}

impl Default for BsplineFitConfig {
    fn default() -> Self {
        Self {
            grid: (16, 16),
            degree: (3, 3),
            smoothness: 1e-2,
            iterations: 2,
            trim_resolution: None,
        }
    }
}

impl BsplineFitConfig {
    pub fn validate(&self) -> Result<()> {
        let (du, dv) = self.degree;
        if du < 1 || dv < 1 {
            return Err(Error::invalid("B-spline degree must be at least 1"));
        }
        if self.grid.0 < du + 1 || self.grid.1 < dv + 1 {
            return Err(Error::invalid(format!(
                "grid {:?} too small for degree {:?}",
                self.grid, self.degree
            )));
        }
        if !(self.smoothness >= 0.0) || !self.smoothness.is_finite() {
            return Err(Error::invalid("smoothness must be finite and non-negative"));
        }
        if self.trim_resolution == Some(0) {
            return Err(Error::invalid("trim_resolution must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BsplineFit {
    pub surface: BsplineSurface,
    /// Final `(u, v)` of every input point.
    pub parameters: Vec<(f64, f64)>,
    /// RMS point-to-surface residual after each solve, in mm.
    pub residual_history: Vec<f64>,
    /// Some trim cell holds points spread along the normal by more than ten
    /// times the median cell spread.
    pub fold_over: bool,
}

const FOLD_OVER_RATIO: f64 = 10.0;
const TARGET_POINTS_PER_CELL: f64 = 4.0;
const NEWTON_STEPS: usize = 6;

/// Least-squares tensor-product fit with PCA parameterization, a thin-plate
/// penalty on the control grid and closest-point re-parameterization.
///
/// The penalty sums squared second divided differences of the control grid
/// over the Greville abscissae (`uu`, `vv` and twice `uv`), which vanishes
/// exactly on affine grids. It is scaled by `trace(A^T A) / trace(L)` so that
/// `smoothness` is independent of point count and grid size.
pub fn fit_bspline_surface(cloud: &PointCloud, cfg: &BsplineFitConfig) -> Result<BsplineFit> {
    cfg.validate()?;
    let n_ctrl = cfg.grid.0 * cfg.grid.1;
    if cloud.len() < n_ctrl {
        return Err(Error::invalid(format!(
            "{} points cannot determine {} control points",
            cloud.len(),
            n_ctrl
        )));
    }
    let (centroid, cov) = covariance(cloud.points.iter().copied());
    let (_, axes) = sorted_eigen(&cov);
    // normal toward the origin (the reference camera centre) and a
    // right-handed in-plane frame so that su x sv follows it
    let mut normal = axes[0];
    if normal.dot(&centroid.coords) > 0.0 {
        normal = -normal;
    }
    let e0 = axes[2];
    let e1 = normal.cross(&e0);

    let local: Vec<(f64, f64)> = cloud
        .points
        .iter()
        .map(|p| {
            let d = p - centroid;
            (d.dot(&e0), d.dot(&e1))
        })
        .collect();
    let (mut umin, mut umax, mut vmin, mut vmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(a, b) in &local {
        umin = umin.min(a);
        umax = umax.max(a);
        vmin = vmin.min(b);
        vmax = vmax.max(b);
    }
    let (urange, vrange) = (umax - umin, vmax - vmin);
    if !(urange > 0.0 && vrange > 0.0) {
        return Err(Error::invalid("cloud has no planar extent"));
    }
    let mut params: Vec<(f64, f64)> = local
        .iter()
        .map(|&(a, b)| ((a - umin) / urange, (b - vmin) / vrange))
        .collect();

    let (du, dv) = cfg.degree;
    let knots_u = clamped_uniform_knots(cfg.grid.0, du)?;
    let knots_v = clamped_uniform_knots(cfg.grid.1, dv)?;
    let (gu, gv) = (greville(&knots_u, du), greville(&knots_v, dv));
    let init: Vec<Point3<f64>> = gu
        .iter()
        .flat_map(|&u| {
            gv.iter()
                .map(move |&v| centroid + e0 * (umin + u * urange) + e1 * (vmin + v * vrange))
        })
        .collect();
    let trim = trim_mask(&params, cfg.trim_resolution);
    // judged on the PCA projection, before re-projection hides folds
    let fold_over = detect_fold_over(cloud, &params, &trim, &centroid, &normal);
    let mut surface = BsplineSurface::new(cfg.degree, knots_u, knots_v, init, trim)?;
    let penalty = bending_matrix(&gu, &gv);

    solve_controls(&mut surface, &cloud.points, &params, &penalty, cfg.smoothness)?;
    let mut history = vec![rms_residual(&surface, &cloud.points, &params)];
    for _ in 0..cfg.iterations {
        let new_params: Vec<(f64, f64)> = cloud
            .points
            .iter()
            .zip(&params)
            .map(|(x, &uv)| reproject(&surface, x, uv))
            .collect();
        let mut candidate = surface.clone();
        solve_controls(&mut candidate, &cloud.points, &new_params, &penalty, cfg.smoothness)?;
        let rms = rms_residual(&candidate, &cloud.points, &new_params);
        if rms > *history.last().unwrap() {
            log::debug!("re-projection raised the residual to {rms}; keeping previous fit");
            break;
        }
        surface = candidate;
        params = new_params;
        history.push(rms);
    }
    surface.trim_mask = trim_mask(&params, cfg.trim_resolution);
    if fold_over {
        log::warn!("cloud is not a height field over its principal plane; fitted surface may fold");
    }
    Ok(BsplineFit {
        surface,
        parameters: params,
        residual_history: history,
        fold_over,
    })
}

fn rms_residual(s: &BsplineSurface, pts: &[Point3<f64>], params: &[(f64, f64)]) -> f64 {
    let ss: f64 = pts
        .iter()
        .zip(params)
        .map(|(x, &(u, v))| (s.evaluate(u, v) - x).norm_squared())
        .sum();
    (ss / pts.len() as f64).sqrt()
}

/// Thin-plate quadratic form `L` on the control grid (u-major indexing).
fn bending_matrix(gu: &[f64], gv: &[f64]) -> DMatrix<f64> {
    let (nu, nv) = (gu.len(), gv.len());
    let n = nu * nv;
    let idx = |i: usize, j: usize| i * nv + j;
    let mut l = DMatrix::zeros(n, n);
    let mut add = |terms: &[(usize, f64)], w: f64| {
        for &(a, ca) in terms {
            for &(b, cb) in terms {
                l[(a, b)] += w * ca * cb;
            }
        }
    };
    let second = |g: &[f64], k: usize| {
        let (h0, h1) = (g[k] - g[k - 1], g[k + 1] - g[k]);
        let s = 2.0 / (h0 + h1);
        [s / h0, -s * (1.0 / h0 + 1.0 / h1), s / h1]
    };
    for i in 1..nu.saturating_sub(1) {
        let c = second(gu, i);
        for j in 0..nv {
            add(&[(idx(i - 1, j), c[0]), (idx(i, j), c[1]), (idx(i + 1, j), c[2])], 1.0);
        }
    }
    for j in 1..nv.saturating_sub(1) {
        let c = second(gv, j);
        for i in 0..nu {
            add(&[(idx(i, j - 1), c[0]), (idx(i, j), c[1]), (idx(i, j + 1), c[2])], 1.0);
        }
    }
    for i in 0..nu - 1 {
        for j in 0..nv - 1 {
            let s = 1.0 / ((gu[i + 1] - gu[i]) * (gv[j + 1] - gv[j]));
            add(
                &[
                    (idx(i, j), s),
                    (idx(i + 1, j), -s),
                    (idx(i, j + 1), -s),
                    (idx(i + 1, j + 1), s),
                ],
                2.0,
            );
        }
    }
    l
}

fn solve_controls(
    s: &mut BsplineSurface,
    pts: &[Point3<f64>],
    params: &[(f64, f64)],
    penalty: &DMatrix<f64>,
    smoothness: f64,
) -> Result<()> {
    let (nu, nv) = (s.nu(), s.nv());
    let n = nu * nv;
    let (du, dv) = s.degree;
    let mut ata = DMatrix::<f64>::zeros(n, n);
    let mut atb = DMatrix::<f64>::zeros(n, 3);
    let mut idx = Vec::with_capacity((du + 1) * (dv + 1));
    let mut val = Vec::with_capacity((du + 1) * (dv + 1));
    for (x, &(u, v)) in pts.iter().zip(params) {
        let (su, bu) = basis_values(&s.knots_u, du, u);
        let (sv, bv) = basis_values(&s.knots_v, dv, v);
        idx.clear();
        val.clear();
        for (a, wu) in bu.iter().enumerate() {
            for (b, wv) in bv.iter().enumerate() {
                idx.push((su - du + a) * nv + sv - dv + b);
                val.push(wu * wv);
            }
        }
        for (p, (&ia, &wa)) in idx.iter().zip(&val).enumerate() {
            for (&ib, &wb) in idx[p..].iter().zip(&val[p..]) {
                ata[(ia.min(ib), ia.max(ib))] += wa * wb;
            }
            for c in 0..3 {
                atb[(ia, c)] += wa * x[c];
            }
        }
    }
    // only the upper triangle was accumulated
    for i in 0..n {
        for j in 0..i {
            ata[(i, j)] = ata[(j, i)];
        }
    }
    if smoothness > 0.0 {
        let scale = ata.trace() / penalty.trace();
        ata += penalty * (smoothness * scale);
    }
    let chol = ata.cholesky().ok_or(Error::SingularSystem)?;
    let sol = chol.solve(&atb);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    for (k, p) in s.control_points.iter_mut().enumerate() {
        *p = Point3::new(sol[(k, 0)], sol[(k, 1)], sol[(k, 2)]);
    }
    Ok(())
}

/// Closest-point refinement of `(u, v)` by damped Newton steps, clamped to
/// the unit square; never increases the distance.
fn reproject(s: &BsplineSurface, x: &Point3<f64>, (u0, v0): (f64, f64)) -> (f64, f64) {
    let (mut u, mut v) = (u0, v0);
    let mut dist = (s.evaluate(u, v) - x).norm_squared();
    for _ in 0..NEWTON_STEPS {
        let d = s.derivatives(u, v);
        let r = d.point - x;
        let g = Vector2::new(d.su.dot(&r), d.sv.dot(&r));
        let mut h = Matrix2::new(
            d.su.dot(&d.su) + d.suu.dot(&r),
            d.su.dot(&d.sv) + d.suv.dot(&r),
            d.su.dot(&d.sv) + d.suv.dot(&r),
            d.sv.dot(&d.sv) + d.svv.dot(&r),
        );
        if !(h[(0, 0)] > 0.0 && h.determinant() > 0.0) {
            // Gauss-Newton fallback away from convex neighbourhoods
            h = Matrix2::new(
                d.su.dot(&d.su),
                d.su.dot(&d.sv),
                d.su.dot(&d.sv),
                d.sv.dot(&d.sv),
            );
        }
        let Some(step) = h.try_inverse().map(|hi| -(hi * g)) else {
            break;
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..4 {
            let (un, vn) = ((u + t * step.x).clamp(0.0, 1.0), (v + t * step.y).clamp(0.0, 1.0));
            let dn = (s.evaluate(un, vn) - x).norm_squared();
            if dn < dist {
                u = un;
                v = vn;
                dist = dn;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved || step.norm() < 1e-12 {
            break;
        }
    }
    (u, v)
}

fn trim_mask(params: &[(f64, f64)], resolution: Option<usize>) -> TrimMask {
    let res = resolution.unwrap_or_else(|| {
        ((params.len() as f64 / TARGET_POINTS_PER_CELL).sqrt().round() as usize).clamp(4, 512)
    });
    let mut mask = TrimMask {
        nu: res,
        nv: res,
        cells: vec![false; res * res],
    };
    for &(u, v) in params {
        let (i, j) = mask.cell_of(u, v);
        mask.set(i, j, true);
    }
    // sampling gaps: fill empty cells whose four edge neighbours are supported
    let snapshot = mask.clone();
    for i in 1..res.saturating_sub(1) {
        for j in 1..res.saturating_sub(1) {
            if !snapshot.get(i, j)
                && snapshot.get(i - 1, j)
                && snapshot.get(i + 1, j)
                && snapshot.get(i, j - 1)
                && snapshot.get(i, j + 1)
            {
                mask.set(i, j, true);
            }
        }
    }
    mask
}

fn detect_fold_over(
    cloud: &PointCloud,
    params: &[(f64, f64)],
    mask: &TrimMask,
    centroid: &Point3<f64>,
    normal: &Vector3<f64>,
) -> bool {
    let mut lo = vec![f64::MAX; mask.cells.len()];
    let mut hi = vec![f64::MIN; mask.cells.len()];
    let mut count = vec![0usize; mask.cells.len()];
    for (p, &(u, v)) in cloud.points.iter().zip(params) {
        let (i, j) = mask.cell_of(u, v);
        let k = i * mask.nv + j;
        let h = (p - centroid).dot(normal);
        lo[k] = lo[k].min(h);
        hi[k] = hi[k].max(h);
        count[k] += 1;
    }
    let mut spreads: Vec<f64> = (0..lo.len())
        .filter(|&k| count[k] >= 2)
        .map(|k| hi[k] - lo[k])
        .collect();
    if spreads.is_empty() {
        return false;
    }
    spreads.sort_by(f64::total_cmp);
    let median = spreads[spreads.len() / 2];
    median > 0.0 && spreads[spreads.len() - 1] > FOLD_OVER_RATIO * median
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid_cloud(n: usize, f: impl Fn(f64, f64) -> Point3<f64>) -> PointCloud {
        PointCloud::from_points(
            (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| f(i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64))
                .collect(),
        )
    }

    #[test]
    fn tilted_plane_is_reproduced() {
        let cloud = grid_cloud(40, |a, b| {
            let (x, y) = (100.0 * a - 50.0, 80.0 * b - 40.0);
            Point3::new(x, y, 400.0 + 0.2 * x - 0.1 * y)
        });
        let cfg = BsplineFitConfig {
            smoothness: 1e-3,
            ..Default::default()
        };
        let fit = fit_bspline_surface(&cloud, &cfg).unwrap();
        let max = cloud
            .points
            .iter()
            .zip(&fit.parameters)
            .map(|(p, &(u, v))| (fit.surface.evaluate(u, v) - p).norm())
            .fold(0.0, f64::max);
        assert!(max < 1e-6, "max residual {max}");
        assert!(!fit.fold_over);
    }

    #[test]
    fn sine_surface_rms() {
        let s = 10.0;
        let cloud = grid_cloud(60, |a, b| {
            let (x, y) = (PI * a, PI * b);
            Point3::new(s * x, s * y, s * x.sin() * y.sin())
        });
        let cfg = BsplineFitConfig {
            grid: (10, 10),
            ..Default::default()
        };
        let fit = fit_bspline_surface(&cloud, &cfg).unwrap();
        let rms = *fit.residual_history.last().unwrap();
        assert!(rms < 0.1, "rms {rms}");
        assert!(fit.residual_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn too_few_points_is_an_input_error() {
        let cloud = grid_cloud(10, |a, b| Point3::new(a, b, 0.0));
        assert!(matches!(
            fit_bspline_surface(&cloud, &BsplineFitConfig::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn unsupported_controls_without_smoothing_are_singular() {
        // data only in a corner of the domain leaves control points free
        let mut pts: Vec<Point3<f64>> = grid_cloud(30, |a, b| Point3::new(a, b, 0.0)).points;
        pts.push(Point3::new(20.0, 20.0, 0.0));
        let cfg = BsplineFitConfig {
            smoothness: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            fit_bspline_surface(&PointCloud::from_points(pts), &cfg),
            Err(Error::SingularSystem)
        ));
    }

    #[test]
    fn bending_energy_vanishes_on_affine_grids() {
        let k = clamped_uniform_knots(7, 3).unwrap();
        let g = greville(&k, 3);
        let l = bending_matrix(&g, &g);
        let f: Vec<f64> = g
            .iter()
            .flat_map(|&u| g.iter().map(move |&v| 3.0 * u - 2.0 * v + 1.0))
            .collect();
        let x = nalgebra::DVector::from_vec(f);
        assert!((x.transpose() * &l * &x)[(0, 0)].abs() < 1e-9);
        let bumpy = nalgebra::DVector::from_fn(49, |i, _| ((i * 7919) % 13) as f64);
        assert!((bumpy.transpose() * &l * &bumpy)[(0, 0)] > 1.0);
    }

    #[test]
    fn folded_cloud_warns() {
        // two sheets 40 mm apart over part of the domain
        let mut pts = grid_cloud(40, |a, b| Point3::new(100.0 * a, 100.0 * b, 0.0)).points;
        pts.extend(grid_cloud(10, |a, b| Point3::new(40.0 + 10.0 * a, 40.0 + 10.0 * b, 40.0)).points);
        let noisy: Vec<_> = pts
            .iter()
            .enumerate()
            .map(|(i, p)| p + Vector3::new(0.0, 0.0, 0.01 * ((i * 37 % 11) as f64)))
            .collect();
        let fit = fit_bspline_surface(&PointCloud::from_points(noisy), &BsplineFitConfig::default()).unwrap();
        assert!(fit.fold_over);
    }
}

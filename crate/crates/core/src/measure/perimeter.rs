use nalgebra::{Point3, Vector3};

use crate::error::Result;
use crate::labeling::BoundaryLoop;

/// Closed C2 cubic interpolating spline (periodic cubic B-spline space) with
/// chord-length knots.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    points: Vec<Vector3<f64>>,
    /// Chord length of span `i` (from point `i` to `i + 1`).
    h: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<Vector3<f64>>,
}

impl PeriodicSpline {
    pub fn interpolate(l: &BoundaryLoop) -> Result<Self> {
        l.validate()?;
        let points: Vec<Vector3<f64>> = l.vertices.iter().map(|p| p.coords).collect();
        let n = points.len();
        let h: Vec<f64> = (0..n).map(|i| (points[(i + 1) % n] - points[i]).norm()).collect();
        // cyclic tridiagonal system for the knot second derivatives
        let sub: Vec<f64> = (0..n).map(|i| h[(i + n - 1) % n]).collect();
        let diag: Vec<f64> = (0..n).map(|i| 2.0 * (h[(i + n - 1) % n] + h[i])).collect();
        let sup: Vec<f64> = h.clone();
        let rhs: Vec<Vector3<f64>> = (0..n)
            .map(|i| {
                let prev = (i + n - 1) % n;
                let next = (i + 1) % n;
                ((points[next] - points[i]) / h[i] - (points[i] - points[prev]) / h[prev]) * 6.0
            })
            .collect();
        let m = solve_cyclic(&sub, &diag, &sup, &rhs);
        Ok(Self { points, h, m })
    }

    pub fn spans(&self) -> usize {
        self.points.len()
    }

    pub fn span_parameter_length(&self, i: usize) -> f64 {
        self.h[i]
    }

    /// Position at local parameter `t` in `[0, h_i]` of span `i`.
    pub fn point(&self, i: usize, t: f64) -> Point3<f64> {
        let n = self.points.len();
        let j = (i + 1) % n;
        let h = self.h[i];
        let s = h - t;
        let p = self.m[i] * (s * s * s / (6.0 * h))
            + self.m[j] * (t * t * t / (6.0 * h))
            + (self.points[i] / h - self.m[i] * (h / 6.0)) * s
            + (self.points[j] / h - self.m[j] * (h / 6.0)) * t;
        Point3::from(p)
    }

    pub fn derivative(&self, i: usize, t: f64) -> Vector3<f64> {
        let n = self.points.len();
        let j = (i + 1) % n;
        let h = self.h[i];
        let s = h - t;
        -self.m[i] * (s * s / (2.0 * h)) + self.m[j] * (t * t / (2.0 * h))
            + (self.points[j] - self.points[i]) / h
            - (self.m[j] - self.m[i]) * (h / 6.0)
    }

    /// Arc length with adaptive Gauss-Legendre quadrature: each span starts
    /// with `panels` panels that split until halves agree to `rel_tol`.
    pub fn arc_length(&self, panels: usize, rel_tol: f64) -> f64 {
        (0..self.spans())
            .map(|i| {
                let h = self.h[i];
                let p = panels.max(1);
                (0..p)
                    .map(|k| {
                        let (a, b) = (h * k as f64 / p as f64, h * (k + 1) as f64 / p as f64);
                        let whole = self.gauss(i, a, b);
                        self.adaptive(i, a, b, whole, rel_tol, 0)
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    fn gauss(&self, i: usize, a: f64, b: f64) -> f64 {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        GL7.iter()
            .map(|&(x, w)| w * self.derivative(i, c + r * x).norm())
            .sum::<f64>()
            * r
    }

    fn adaptive(&self, i: usize, a: f64, b: f64, whole: f64, tol: f64, depth: usize) -> f64 {
        let mid = 0.5 * (a + b);
        let (l, r) = (self.gauss(i, a, mid), self.gauss(i, mid, b));
        if depth >= 40 || (l + r - whole).abs() <= tol * (l + r).abs() {
            return l + r;
        }
        self.adaptive(i, a, mid, l, tol, depth + 1) + self.adaptive(i, mid, b, r, tol, depth + 1)
    }
}

/// Seven-point Gauss-Legendre nodes and weights on `[-1, 1]`.
const GL7: [(f64, f64); 7] = [
    (0.0, 0.417_959_183_673_469_4),
    (0.405_845_151_377_397_2, 0.381_830_050_505_118_9),
    (-0.405_845_151_377_397_2, 0.381_830_050_505_118_9),
    (0.741_531_185_599_394_4, 0.279_705_391_489_276_7),
    (-0.741_531_185_599_394_4, 0.279_705_391_489_276_7),
    (0.949_107_912_342_758_5, 0.129_484_966_168_869_7),
    (-0.949_107_912_342_758_5, 0.129_484_966_168_869_7),
];

/// Relative tolerance of the arc-length quadrature.
pub const ARC_LENGTH_TOL: f64 = 1e-6;

/// Length of the periodic interpolating spline through the loop. `samples`
/// is the minimum total number of quadrature panels, spread evenly over the
/// spans.
pub fn perimeter(l: &BoundaryLoop, samples: usize) -> Result<f64> {
    let s = PeriodicSpline::interpolate(l)?;
    let per_span = samples.div_ceil(s.spans()).max(1);
    Ok(s.arc_length(per_span, ARC_LENGTH_TOL))
}

/// Solves a cyclic tridiagonal system with three right-hand sides by the
/// Sherman-Morrison correction of the Thomas algorithm.
fn solve_cyclic(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let n = diag.len();
    let alpha = sup[n - 1]; // row n-1, column 0
    let beta = sub[0]; // row 0, column n-1
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= alpha * beta / gamma;
    let x = thomas(sub, &d, sup, rhs);
    let mut u = vec![Vector3::zeros(); n];
    u[0] = Vector3::repeat(gamma);
    u[n - 1] = Vector3::repeat(alpha);
    let z = thomas(sub, &d, sup, &u);
    let fact_num = x[0] + x[n - 1] * (beta / gamma);
    let fact_den = Vector3::repeat(1.0) + z[0] + z[n - 1] * (beta / gamma);
    let fact = fact_num.component_div(&fact_den);
    x.iter().zip(&z).map(|(xi, zi)| xi - zi.component_mul(&fact)).collect()
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![Vector3::zeros(); n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / den;
        d[i] = (rhs[i] - d[i - 1] * sub[i]) / den;
    }
    for i in (0..n - 1).rev() {
        d[i] = d[i] - d[i + 1] * c[i];
    }
    d
}

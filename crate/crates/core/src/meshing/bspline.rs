use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clamped knot vector on `[0, 1]` with uniform interior knots.
pub fn clamped_uniform_knots(n_ctrl: usize, degree: usize) -> Result<Vec<f64>> {
    if degree < 1 || n_ctrl < degree + 1 {
        return Err(Error::invalid(format!(
            "{n_ctrl} control points cannot carry degree {degree}"
        )));
    }
    let spans = n_ctrl - degree;
    let mut k = vec![0.0; degree + 1];
    k.extend((1..spans).map(|i| i as f64 / spans as f64));
    k.extend(std::iter::repeat_n(1.0, degree + 1));
    Ok(k)
}

/// Knot span index `i` with `knots[i] <= u < knots[i+1]`; the right end maps
/// to the last non-empty span.
pub fn find_span(knots: &[f64], degree: usize, u: f64) -> usize {
    let n = knots.len() - degree - 2;
    if u >= knots[n + 1] {
        return n;
    }
    if u <= knots[degree] {
        return degree;
    }
    let (mut lo, mut hi) = (degree, n + 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if u < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Non-zero basis values and derivatives up to order `nd` at `u`, Cox-de Boor
/// triangle. Returns the span and `ders[k][j] = d^k N_{span-degree+j} / du^k`.
pub fn basis_derivatives(knots: &[f64], degree: usize, u: f64, nd: usize) -> (usize, Vec<Vec<f64>>) {
    let p = degree;
    let span = find_span(knots, p, u);
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let mut ders = vec![vec![0.0; p + 1]; nd + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let mut a = [vec![0.0; p + 1], vec![0.0; p + 1]];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=nd.min(p) {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = p as f64;
    for k in 1..=nd.min(p) {
        for v in &mut ders[k] {
            *v *= factor;
        }
        factor *= (p - k) as f64;
    }
    (span, ders)
}

/// Non-zero basis values at `u`; see [`basis_derivatives`].
pub fn basis_values(knots: &[f64], degree: usize, u: f64) -> (usize, Vec<f64>) {
    let (span, mut d) = basis_derivatives(knots, degree, u, 0);
    (span, d.swap_remove(0))
}

/// Greville abscissae: knot averages at which an affine control polygon
/// reproduces the affine function exactly.
pub fn greville(knots: &[f64], degree: usize) -> Vec<f64> {
    let n = knots.len() - degree - 1;
    (0..n)
        .map(|i| knots[i + 1..=i + degree].iter().sum::<f64>() / degree as f64)
        .collect()
}

/// Boolean grid over `[0,1]^2`; `cells[i * nv + j]` covers
/// `[i/nu, (i+1)/nu) x [j/nv, (j+1)/nv)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimMask {
    pub nu: usize,
    pub nv: usize,
    pub cells: Vec<bool>,
}

impl TrimMask {
    pub fn full(nu: usize, nv: usize) -> Self {
        Self {
            nu,
            nv,
            cells: vec![true; nu * nv],
        }
    }

    pub fn cell_of(&self, u: f64, v: f64) -> (usize, usize) {
        let i = ((u * self.nu as f64).floor().max(0.0) as usize).min(self.nu - 1);
        let j = ((v * self.nv as f64).floor().max(0.0) as usize).min(self.nv - 1);
        (i, j)
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.nv + j]
    }

    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        self.cells[i * self.nv + j] = on;
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        let (i, j) = self.cell_of(u, v);
        self.get(i, j)
    }

    pub fn supported_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

/// Point and first/second partial derivatives of a surface.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceDerivatives {
    pub point: Point3<f64>,
    pub su: Vector3<f64>,
    pub sv: Vector3<f64>,
    pub suu: Vector3<f64>,
    pub suv: Vector3<f64>,
    pub svv: Vector3<f64>,
}

/// Tensor-product B-spline surface over `[0,1]^2` with a data-support trim
/// mask. Control points are stored u-major: `control_points[i * nv + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BsplineSurface {
    pub degree: (usize, usize),
    pub knots_u: Vec<f64>,
    pub knots_v: Vec<f64>,
    pub control_points: Vec<Point3<f64>>,
    pub trim_mask: TrimMask,
}

impl BsplineSurface {
    pub fn new(
        degree: (usize, usize),
        knots_u: Vec<f64>,
        knots_v: Vec<f64>,
        control_points: Vec<Point3<f64>>,
        trim_mask: TrimMask,
    ) -> Result<Self> {
        let s = Self {
            degree,
            knots_u,
            knots_v,
            control_points,
            trim_mask,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn nu(&self) -> usize {
        self.knots_u.len() - self.degree.0 - 1
    }

    pub fn nv(&self) -> usize {
        self.knots_v.len() - self.degree.1 - 1
    }

    pub fn validate(&self) -> Result<()> {
        for (name, knots, p) in [("u", &self.knots_u, self.degree.0), ("v", &self.knots_v, self.degree.1)] {
            if p < 1 || knots.len() < 2 * (p + 1) {
                return Err(Error::invalid(format!("knots_{name} too short for degree {p}")));
            }
            if knots.windows(2).any(|w| !(w[0] <= w[1])) {
                return Err(Error::invalid(format!("knots_{name} not nondecreasing")));
            }
            let (first, last) = (knots[0], knots[knots.len() - 1]);
            if knots[..=p].iter().any(|&k| k != first) || knots[knots.len() - p - 1..].iter().any(|&k| k != last) {
                return Err(Error::invalid(format!("knots_{name} not clamped")));
            }
        }
        if self.control_points.len() != self.nu() * self.nv() {
            return Err(Error::DimensionMismatch(format!(
                "{} control points for a {}x{} grid",
                self.control_points.len(),
                self.nu(),
                self.nv()
            )));
        }
        if self.trim_mask.nu == 0
            || self.trim_mask.nv == 0
            || self.trim_mask.cells.len() != self.trim_mask.nu * self.trim_mask.nv
        {
            return Err(Error::DimensionMismatch("trim mask".into()));
        }
        Ok(())
    }

    pub fn control(&self, i: usize, j: usize) -> Point3<f64> {
        self.control_points[i * self.nv() + j]
    }

    pub fn evaluate(&self, u: f64, v: f64) -> Point3<f64> {
        let (su, nu) = basis_values(&self.knots_u, self.degree.0, u);
        let (sv, nv) = basis_values(&self.knots_v, self.degree.1, v);
        let (i0, j0) = (su - self.degree.0, sv - self.degree.1);
        let mut acc = Vector3::zeros();
        for (a, bu) in nu.iter().enumerate() {
            for (b, bv) in nv.iter().enumerate() {
                acc += self.control(i0 + a, j0 + b).coords * (bu * bv);
            }
        }
        Point3::from(acc)
    }

    pub fn derivatives(&self, u: f64, v: f64) -> SurfaceDerivatives {
        let (su, du) = basis_derivatives(&self.knots_u, self.degree.0, u, 2);
        let (sv, dv) = basis_derivatives(&self.knots_v, self.degree.1, v, 2);
        let (i0, j0) = (su - self.degree.0, sv - self.degree.1);
        let mut out = [Vector3::zeros(); 6];
        for a in 0..=self.degree.0 {
            for b in 0..=self.degree.1 {
                let c = self.control(i0 + a, j0 + b).coords;
                out[0] += c * (du[0][a] * dv[0][b]);
                out[1] += c * (du[1][a] * dv[0][b]);
                out[2] += c * (du[0][a] * dv[1][b]);
                out[3] += c * (du[2][a] * dv[0][b]);
                out[4] += c * (du[1][a] * dv[1][b]);
                out[5] += c * (du[0][a] * dv[2][b]);
            }
        }
        SurfaceDerivatives {
            point: Point3::from(out[0]),
            su: out[1],
            sv: out[2],
            suu: out[3],
            suv: out[4],
            svv: out[5],
        }
    }

    /// Unit normal `su x sv`, or zero where the surface is singular.
    pub fn normal(&self, u: f64, v: f64) -> Vector3<f64> {
        let d = self.derivatives(u, v);
        let n = d.su.cross(&d.sv);
        let l = n.norm();
        if l > 0.0 {
            n / l
        } else {
            Vector3::zeros()
        }
    }

    pub fn dump(&self) -> SurfaceDump {
        SurfaceDump {
            degree: [self.degree.0, self.degree.1],
            knots_u: self.knots_u.clone(),
            knots_v: self.knots_v.clone(),
            grid: [self.nu(), self.nv()],
            control_points: self.control_points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            trim_mask: self.trim_mask.clone(),
        }
    }
}

/// JSON debug form of a surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDump {
    pub degree: [usize; 2],
    pub knots_u: Vec<f64>,
    pub knots_v: Vec<f64>,
    pub grid: [usize; 2],
    pub control_points: Vec<[f64; 3]>,
    pub trim_mask: TrimMask,
}

impl SurfaceDump {
    pub fn into_surface(self) -> Result<BsplineSurface> {
        let s = BsplineSurface::new(
            (self.degree[0], self.degree[1]),
            self.knots_u,
            self.knots_v,
            self.control_points.into_iter().map(Point3::from).collect(),
            self.trim_mask,
        )?;
        if [s.nu(), s.nv()] != self.grid {
            return Err(Error::DimensionMismatch("grid does not match knots".into()));
        }
        Ok(s)
    }
}

use std::collections::HashSet;

use nalgebra::{Matrix3, Point3, Vector2, Vector3};
use robust::Coord;

use crate::cloud::{covariance, sorted_eigen};
use crate::error::{Error, Result};
use crate::meshing::Delaunay3;

/// Box with orthonormal `axes` (columns) and full edge lengths `extents`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Point3<f64>,
    pub axes: Matrix3<f64>,
    pub extents: Vector3<f64>,
}

impl OrientedBox {
    pub fn volume(&self) -> f64 {
        self.extents.x * self.extents.y * self.extents.z
    }

    pub fn contains(&self, p: &Point3<f64>, tol: f64) -> bool {
        let local = self.axes.transpose() * (p - self.center);
        (0..3).all(|k| local[k].abs() <= 0.5 * self.extents[k] + tol)
    }

    /// Tight box around `pts` with the given orthonormal axes.
    pub fn fit(pts: &[Point3<f64>], axes: Matrix3<f64>) -> Self {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for p in pts {
            let l = axes.transpose() * p.coords;
            lo = lo.inf(&l);
            hi = hi.sup(&l);
        }
        Self {
            center: Point3::from(axes * ((lo + hi) * 0.5)),
            axes,
            extents: hi - lo,
        }
    }
}

/// Hull normals are deduplicated on a direction grid of this cell size,
/// coarsened 4x at a time while more than `MAX_CANDIDATES` remain. Curved
/// regions give tens of thousands of hull faces, each an O(h log h)
/// rectangle search.
const NORMAL_CELL: f64 = 1e-9;
const MAX_CANDIDATES: usize = 256;

/// Bounding box aligned with the principal axes of the points.
pub fn pca_box(pts: &[Point3<f64>]) -> Result<OrientedBox> {
    if pts.is_empty() {
        return Err(Error::invalid("bounding box of no points"));
    }
    let (_, cov) = covariance(pts.iter().copied());
    let (_, v) = sorted_eigen(&cov);
    Ok(OrientedBox::fit(pts, right_handed(v[2], v[1])))
}

/// Minimal-volume box over orientations set by convex-hull face normals,
/// each paired with the minimal-area rectangle of the projection (rotating
/// calipers). The PCA box is a candidate too, so the result is never worse.
/// Coplanar input reduces to the minimal-area rectangle in its plane.
pub fn minimal_box(pts: &[Point3<f64>]) -> Result<OrientedBox> {
    let mut best = pca_box(pts)?;
    let (candidates, hull_pts) = match Delaunay3::new(pts) {
        Ok(dt) => (
            hull_normals(&dt),
            dt.hull_vertices().into_iter().map(|v| dt.points()[v]).collect(),
        ),
        // coplanar, collinear or fewer than four distinct points
        Err(_) => (vec![best.axes.column(2).into_owned()], pts.to_vec()),
    };
    for n in distinct_directions(&candidates) {
        let b = box_for_normal(&hull_pts, &n);
        if b.volume() < best.volume() - 1e-12 * best.volume().abs()
            || (b.volume() <= best.volume() && b.extents.sum() < best.extents.sum())
        {
            best = b;
        }
    }
    Ok(best)
}

/// Box extents sorted descending: (height, width, depth).
pub fn box_dimensions(pts: &[Point3<f64>]) -> Result<(f64, f64, f64)> {
    let b = minimal_box(pts)?;
    let mut e = [b.extents.x, b.extents.y, b.extents.z];
    e.sort_by(|a, b| b.total_cmp(a));
    Ok((e[0], e[1], e[2]))
}

/// First normal of each occupied grid cell, in input order; `n` and `-n`
/// share a cell since they give the same box.
fn distinct_directions(normals: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let mut cell = NORMAL_CELL;
    loop {
        let mut seen = HashSet::new();
        let picked: Vec<Vector3<f64>> = normals
            .iter()
            .filter(|n| {
                let flip = if (n.x, n.y, n.z) < (0.0, 0.0, 0.0) { -1.0 } else { 1.0 };
                seen.insert(n.map(|c| (flip * c / cell).round() as i64))
            })
            .copied()
            .collect();
        if picked.len() <= MAX_CANDIDATES {
            return picked;
        }
        cell *= 4.0;
    }
}

fn right_handed(a: Vector3<f64>, b: Vector3<f64>) -> Matrix3<f64> {
    let c = a.cross(&b).normalize();
    let b = c.cross(&a).normalize();
    Matrix3::from_columns(&[a.normalize(), b, c])
}

fn hull_normals(dt: &Delaunay3) -> Vec<Vector3<f64>> {
    dt.hull_faces()
        .into_iter()
        .filter_map(|[a, b, c]| {
            let p = dt.points();
            (p[b] - p[a]).cross(&(p[c] - p[a])).try_normalize(0.0)
        })
        .collect()
}

fn box_for_normal(pts: &[Point3<f64>], n: &Vector3<f64>) -> OrientedBox {
    let n = n.normalize();
    let seed = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e0 = n.cross(&seed).normalize();
    let e1 = n.cross(&e0);
    let proj: Vec<Vector2<f64>> = pts.iter().map(|p| Vector2::new(p.coords.dot(&e0), p.coords.dot(&e1))).collect();
    let dir = min_area_rect_direction(&proj);
    let a = e0 * dir.x + e1 * dir.y;
    OrientedBox::fit(pts, right_handed(a, n.cross(&a)))
}

/// Edge direction of the convex hull giving the minimal-area enclosing
/// rectangle.
fn min_area_rect_direction(pts: &[Vector2<f64>]) -> Vector2<f64> {
    let hull = convex_hull_2d(pts);
    if hull.len() < 2 {
        return Vector2::x();
    }
    let mut best = (f64::INFINITY, Vector2::x());
    for i in 0..hull.len() {
        let Some(d) = (hull[(i + 1) % hull.len()] - hull[i]).try_normalize(0.0) else {
            continue;
        };
        let o = Vector2::new(-d.y, d.x);
        let (mut a0, mut a1, mut b0, mut b1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &hull {
            let (a, b) = (p.dot(&d), p.dot(&o));
            a0 = a0.min(a);
            a1 = a1.max(a);
            b0 = b0.min(b);
            b1 = b1.max(b);
        }
        let area = (a1 - a0) * (b1 - b0);
        if area < best.0 {
            best = (area, d);
        }
    }
    best.1
}

/// Andrew's monotone chain with exact orientation tests; collinear points
/// are dropped.
fn convex_hull_2d(pts: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let mut p = pts.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| {
        robust::orient2d(Coord { x: o.x, y: o.y }, Coord { x: a.x, y: a.y }, Coord { x: b.x, y: b.y })
    };
    let mut hull: Vec<Vector2<f64>> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vector2<f64>>> =
            if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for q in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(*q);
        }
        hull.pop();
    }
    hull
}

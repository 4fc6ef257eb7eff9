use super::bspline::BsplineSurface;
use super::mesh::TriangleMesh;
use crate::error::{Error, Result};

/// Evaluates the surface on a `mu x mv` parameter grid and emits two
/// triangles per cell whose centre falls in a supported trim cell. Faces
/// follow `su x sv`; unreferenced vertices are dropped.
pub fn tessellate(surface: &BsplineSurface, samples: (usize, usize)) -> Result<TriangleMesh> {
    let (mu, mv) = samples;
    if mu < 2 || mv < 2 {
        return Err(Error::invalid("tessellation needs at least 2x2 samples"));
    }
    let uv = |i: usize, j: usize| (i as f64 / (mu - 1) as f64, j as f64 / (mv - 1) as f64);
    let mut vertices = Vec::with_capacity(mu * mv);
    let mut normals = Vec::with_capacity(mu * mv);
    for i in 0..mu {
        for j in 0..mv {
            let (u, v) = uv(i, j);
            let d = surface.derivatives(u, v);
            vertices.push(d.point);
            normals.push(d.su.cross(&d.sv).try_normalize(0.0).unwrap_or_default());
        }
    }
    let id = |i: usize, j: usize| i * mv + j;
    let mut mesh = TriangleMesh::new(vertices, Vec::new());
    for i in 0..mu - 1 {
        for j in 0..mv - 1 {
            let (u0, v0) = uv(i, j);
            let (u1, v1) = uv(i + 1, j + 1);
            if !surface.trim_mask.contains(0.5 * (u0 + u1), 0.5 * (v0 + v1)) {
                continue;
            }
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            for f in [[a, b, c], [a, c, d]] {
                mesh.faces.push(f);
                if mesh.face_cross(mesh.faces.len() - 1).norm_squared() == 0.0 {
                    mesh.faces.pop();
                }
            }
        }
    }
    // fall back to face normals where the parameterization is singular
    let mut mesh = mesh;
    let face_based = mesh.clone().with_vertex_normals().vertex_normals.unwrap();
    for (n, fb) in normals.iter_mut().zip(face_based) {
        if n.norm_squared() == 0.0 {
            *n = fb;
        }
    }
    mesh.vertex_normals = Some(normals);
    Ok(mesh.compact())
}

/// Sample counts giving about `spacing` mm between neighbouring samples
/// along the longest iso-curve in each direction, clamped to `[2, 4096]`.
pub fn samples_for_spacing(surface: &BsplineSurface, spacing: f64) -> Result<(usize, usize)> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::invalid("tessellation spacing must be positive"));
    }
    const STEPS: usize = 128;
    let iso_length = |along_u: bool, fixed: f64| -> f64 {
        let at = |t: f64| if along_u { surface.evaluate(t, fixed) } else { surface.evaluate(fixed, t) };
        (0..STEPS)
            .map(|k| (at((k + 1) as f64 / STEPS as f64) - at(k as f64 / STEPS as f64)).norm())
            .sum()
    };
    let longest = |along_u: bool| {
        [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&f| iso_length(along_u, f))
            .fold(0.0, f64::max)
    };
    let count = |len: f64| ((len / spacing).ceil() as usize + 1).clamp(2, 4096);
    Ok((count(longest(true)), count(longest(false))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshing::bspline::{clamped_uniform_knots, greville, TrimMask};
    use nalgebra::Point3;

    fn plane(trim: TrimMask) -> BsplineSurface {
        let k = clamped_uniform_knots(4, 3).unwrap();
        let g = greville(&k, 3);
        let ctrl = g
            .iter()
            .flat_map(|&u| g.iter().map(move |&v| Point3::new(30.0 * u, 20.0 * v, 5.0)))
            .collect();
        BsplineSurface::new((3, 3), k.clone(), k, ctrl, trim).unwrap()
    }

    #[test]
    fn spacing_sets_sample_counts() {
        let s = plane(TrimMask::full(1, 1));
        assert_eq!(samples_for_spacing(&s, 0.7).unwrap(), (44, 30));
        assert!(samples_for_spacing(&s, 0.0).is_err());
    }

    #[test]
    fn two_by_two_samples_give_two_triangles() {
        let m = tessellate(&plane(TrimMask::full(1, 1)), (2, 2)).unwrap();
        assert_eq!(m.faces.len(), 2);
        assert!((m.total_area() - 600.0).abs() < 1e-9);
        assert!(m.face_normal(0).z > 0.0);
    }

    #[test]
    fn half_trimmed_grid_halves_faces() {
        let mut trim = TrimMask::full(8, 8);
        for i in 0..4 {
            for j in 0..8 {
                trim.set(i, j, false);
            }
        }
        let m = tessellate(&plane(trim), (9, 9)).unwrap();
        assert_eq!(m.faces.len(), 2 * 32);
        assert!((m.total_area() - 300.0).abs() < 1e-9);
        assert!(m.is_consistently_oriented());
    }

    #[test]
    fn rejects_single_row() {
        assert!(tessellate(&plane(TrimMask::full(1, 1)), (1, 5)).is_err());
    }
}

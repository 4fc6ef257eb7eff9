use std::collections::HashSet;

use nalgebra::{Point3, Vector3};
use proptest::prelude::*;
use woundmesh::labeling::{knn_label_transfer, savitzky_golay_kernel, savitzky_golay_smooth, BoundaryLoop};
use woundmesh::measure::{measure_region, minimal_box, pca_box, MeasureConfig};
use woundmesh::meshing::{
    alpha_complex, basis_values, clamped_uniform_knots, fit_bspline_surface, tessellate, BsplineFitConfig, Delaunay3,
    TriangleMesh,
};
use woundmesh::metrics::{distance_metrics, sample_mesh_uniform};
use woundmesh::{PointCloud, RigidTransform};

fn point(range: f64) -> impl Strategy<Value = Point3<f64>> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn rigid() -> impl Strategy<Value = RigidTransform> {
    (point(1.0), 0.0..std::f64::consts::PI, point(100.0)).prop_filter_map("zero axis", |(a, angle, t)| {
        (a.coords.norm() > 1e-3).then(|| RigidTransform::from_axis_angle(a.coords, angle, t.coords))
    })
}

fn cloud_with_normals(n: std::ops::Range<usize>) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec((point(10.0), point(1.0)), n).prop_map(|v| {
        let mut c = PointCloud::from_points(v.iter().map(|(p, _)| *p).collect());
        c.normals = Some(v.iter().map(|(_, n)| (n.coords + Vector3::new(0.0, 0.0, 2.0)).normalize()).collect());
        c
    })
}

/// Grid over a wavy height field with a disk of label 1.
fn labeled_grid(n: usize, amp: f64, r: f64) -> TriangleMesh {
    let mut vertices = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (i as f64 - (n / 2) as f64, j as f64 - (n / 2) as f64);
            vertices.push(Point3::new(x, y, amp * (0.2 * x).sin() * (0.15 * y).cos()));
            labels.push((x * x + y * y < r * r) as u32);
        }
    }
    let mut faces = Vec::new();
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            let v = i * n + j;
            faces.push([v, v + n, v + n + 1]);
            faces.push([v, v + n + 1, v + 1]);
        }
    }
    let mut m = TriangleMesh::new(vertices, faces);
    m.vertex_labels = Some(labels);
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn basis_is_a_nonnegative_partition_of_unity(degree in 1usize..6, extra in 1usize..12, u in 0.0..=1.0f64) {
        let knots = clamped_uniform_knots(degree + extra, degree).unwrap();
        let (_, b) = basis_values(&knots, degree, u);
        prop_assert_eq!(b.len(), degree + 1);
        prop_assert!(b.iter().all(|&v| v >= -1e-15));
        prop_assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn savitzky_golay_kernel_sums_to_one(half in 1usize..16, order in 0usize..8) {
        let window = 2 * half + 1;
        prop_assume!(order < window);
        let k = savitzky_golay_kernel(window, order).unwrap();
        prop_assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // symmetric, so odd moments vanish too
        for (a, b) in k.iter().zip(k.iter().rev()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn savitzky_golay_reproduces_polynomials_away_from_the_seam(
        half in 1usize..8,
        order in 1usize..5,
        extra in 1usize..40,
        coeffs in prop::collection::vec(point(1.0), 5),
    ) {
        let window = 2 * half + 1;
        prop_assume!(order < window);
        let n = window + extra;
        let verts: Vec<Point3<f64>> = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                let mut p = Vector3::new(10.0 * t, 0.0, 0.0);
                for (d, c) in coeffs.iter().take(order + 1).enumerate() {
                    p += c.coords * (10.0 * t.powi(d as i32));
                }
                Point3::from(p)
            })
            .collect();
        let l = BoundaryLoop::new(verts.clone()).unwrap();
        let s = savitzky_golay_smooth(&l, window, order).unwrap();
        prop_assert_eq!(s.len(), n);
        for i in half..n - half {
            prop_assert!((s.vertices[i] - verts[i]).norm() < 1e-9);
        }
    }

    #[test]
    fn oriented_box_encloses_and_beats_pca(pts in prop::collection::vec(point(30.0), 4..60)) {
        let best = minimal_box(&pts).unwrap();
        let pca = pca_box(&pts).unwrap();
        prop_assert!(best.volume() <= pca.volume() * (1.0 + 1e-9));
        for p in &pts {
            prop_assert!(best.contains(p, 1e-7));
        }
    }

    #[test]
    fn metrics_are_symmetric(a in cloud_with_normals(1..80), b in cloud_with_normals(1..80)) {
        let ab = distance_metrics(&a, &b).unwrap();
        let ba = distance_metrics(&b, &a).unwrap();
        prop_assert!((ab.ad_mm - ba.ad_mm).abs() < 1e-12);
        prop_assert_eq!(ab.hd_mm, ba.hd_mm);
        prop_assert_eq!(ab.hd90_mm, ba.hd90_mm);
        prop_assert!((ab.nc.unwrap() - ba.nc.unwrap()).abs() < 1e-12);
        prop_assert!(ab.ad_mm <= ab.hd90_mm && ab.hd90_mm <= ab.hd_mm);
    }

    #[test]
    fn metrics_are_rigidly_invariant(a in cloud_with_normals(1..60), b in cloud_with_normals(1..60), t in rigid()) {
        let before = distance_metrics(&a, &b).unwrap();
        let after = distance_metrics(&a.transformed(&t), &b.transformed(&t)).unwrap();
        prop_assert!((before.ad_mm - after.ad_mm).abs() < 1e-9);
        prop_assert!((before.hd_mm - after.hd_mm).abs() < 1e-9);
        prop_assert!((before.hd90_mm - after.hd90_mm).abs() < 1e-9);
        prop_assert!((before.nc.unwrap() - after.nc.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn label_transfer_ignores_reference_order(
        refs in prop::collection::vec((point(10.0), 0u32..2), 1..80),
        verts in prop::collection::vec(point(10.0), 3..40),
        k in 1usize..10,
        seed in any::<u64>(),
    ) {
        let mesh = TriangleMesh::new(verts, vec![[0, 1, 2]]);
        let mut cloud = PointCloud::from_points(refs.iter().map(|r| r.0).collect());
        cloud.labels = Some(refs.iter().map(|r| r.1).collect());
        let mut order: Vec<usize> = (0..refs.len()).collect();
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled = cloud.select(&order);
        let a = knn_label_transfer(&mesh, &[cloud.clone()], k).unwrap();
        let b = knn_label_transfer(&mesh, &[shuffled], k).unwrap();
        prop_assert_eq!(&a.vertex_labels, &b.vertex_labels);
        if k == 1 {
            for (v, &l) in mesh.vertices.iter().zip(a.vertex_labels.as_ref().unwrap()) {
                let nearest = refs
                    .iter()
                    .min_by(|x, y| (x.0 - v).norm_squared().total_cmp(&(y.0 - v).norm_squared()))
                    .unwrap();
                prop_assert_eq!(l, nearest.1);
            }
        }
    }

    #[test]
    fn measurements_are_rigidly_invariant(t in rigid(), amp in 0.0..4.0f64, r in 6.0..12.0f64) {
        let mesh = labeled_grid(31, amp, r);
        let cfg = MeasureConfig::default();
        let a = measure_region(&mesh, &cfg).unwrap();
        let b = measure_region(&mesh.transformed(&t), &cfg).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-6 * x.abs().max(1.0);
        prop_assert!(close(a.perimeter_mm, b.perimeter_mm));
        prop_assert!(close(a.surface_area_mm2, b.surface_area_mm2));
        prop_assert!(close(a.height_mm, b.height_mm));
        prop_assert!(close(a.width_mm, b.width_mm));
        prop_assert!(close(a.depth_mm, b.depth_mm));
        prop_assert_eq!(a.region_face_count, b.region_face_count);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn alpha_complexes_are_nested(pts in prop::collection::vec(point(10.0), 8..40), a in 0.5..6.0f64, b in 0.5..6.0f64) {
        let dt = Delaunay3::new(&pts).unwrap();
        let (lo, hi) = (a.min(b), a.max(b));
        let small = alpha_complex(&dt, lo);
        let large = alpha_complex(&dt, hi);
        let key = |t: &[usize]| {
            let mut k = t.to_vec();
            k.sort_unstable();
            k
        };
        let big_tets: HashSet<_> = large.tetrahedra.iter().map(|t| key(t)).collect();
        prop_assert!(small.tetrahedra.iter().all(|t| big_tets.contains(&key(t))));
        // boundary faces turn interior as alpha grows; the complex's full
        // triangle set (tetrahedron faces plus free triangles) is what nests
        let all_tris = |c: &woundmesh::meshing::AlphaComplex| -> HashSet<Vec<usize>> {
            c.tetrahedra
                .iter()
                .flat_map(|t| [[t[0], t[1], t[2]], [t[0], t[1], t[3]], [t[0], t[2], t[3]], [t[1], t[2], t[3]]])
                .chain(c.triangles.iter().copied())
                .map(|t| key(&t))
                .collect()
        };
        prop_assert!(all_tris(&small).is_subset(&all_tris(&large)));
    }

    #[test]
    fn tessellated_fits_are_consistently_oriented(
        heights in prop::collection::vec(-3.0..3.0f64, 100),
        tilt in -0.5..0.5f64,
    ) {
        let pts = (0..100)
            .map(|i| {
                let (x, y) = ((i % 10) as f64 * 4.0, (i / 10) as f64 * 4.0);
                Point3::new(x, y, tilt * x + heights[i])
            })
            .collect();
        let fit = fit_bspline_surface(
            &PointCloud::from_points(pts),
            &BsplineFitConfig { grid: (5, 5), iterations: 1, ..Default::default() },
        )
        .unwrap();
        let mesh = tessellate(&fit.surface, (12, 12)).unwrap();
        prop_assert!(mesh.is_consistently_oriented());
        prop_assert!(!mesh.faces.is_empty());
    }

    #[test]
    fn uniform_samples_follow_face_areas(scale in 1.0..5.0f64, seed in any::<u64>()) {
        // unit triangle and one `scale²` times larger, side by side
        let mesh = TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(2.0, 0.0, 0.0),
                Point3::new(2.0 + scale, 0.0, 0.0),
                Point3::new(2.0, scale, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        );
        let n = 20_000;
        let cloud = sample_mesh_uniform(&mesh, n, seed).unwrap();
        let small = cloud.points.iter().filter(|p| p.x < 1.5).count() as f64 / n as f64;
        let p = 1.0 / (1.0 + scale * scale);
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        prop_assert!((small - p).abs() < 5.0 * sd, "fraction {} vs {}", small, p);
    }
}

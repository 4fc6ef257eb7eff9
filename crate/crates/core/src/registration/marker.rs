use std::collections::BTreeMap;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::registration::kabsch::{rigid_from_correspondences, CorrespondenceSet};
use crate::rgbd::RgbdFrame;
use crate::transform::RigidTransform;

/// Depth (mm) at a continuous pixel position: bilinear over the nonzero
/// taps with renormalised weights, falling back to the mean of the nonzero
/// values in the 3x3 neighbourhood of the nearest pixel.
pub fn sample_depth_bilinear(frame: &RgbdFrame, u: f64, v: f64, depth_scale: f64) -> Option<f64> {
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    let x0 = u.floor() as i64;
    let y0 = v.floor() as i64;
    let (tx, ty) = (u - x0 as f64, v - y0 as f64);
    let mut acc = 0.0;
    let mut wsum = 0.0;
    for (dx, dy, wt) in [
        (0, 0, (1.0 - tx) * (1.0 - ty)),
        (1, 0, tx * (1.0 - ty)),
        (0, 1, (1.0 - tx) * ty),
        (1, 1, tx * ty),
    ] {
        let (x, y) = (x0 + dx, y0 + dy);
        if wt <= 0.0 || x < 0 || y < 0 || x >= w || y >= h {
            continue;
        }
        if let Some(z) = frame.depth_mm(x as usize, y as usize, depth_scale) {
            acc += wt * z;
            wsum += wt;
        }
    }
    if wsum > 0.0 {
        return Some(acc / wsum);
    }
    let (xc, yc) = (u.round() as i64, v.round() as i64);
    let mut sum = 0.0;
    let mut n = 0;
    for y in yc - 1..=yc + 1 {
        for x in xc - 1..=xc + 1 {
            if x < 0 || y < 0 || x >= w || y >= h {
                continue;
            }
            if let Some(z) = frame.depth_mm(x as usize, y as usize, depth_scale) {
                sum += z;
                n += 1;
            }
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Lifted marker corners keyed by `(marker_id, corner_index)`.
fn lift_corners(frame: &RgbdFrame, depth_scale: f64) -> Result<BTreeMap<(i64, usize), Point3<f64>>> {
    let mut out = BTreeMap::new();
    for m in frame.marker_corners.iter().flatten() {
        for (ci, c) in m.corners.iter().enumerate() {
            let z = sample_depth_bilinear(frame, c[0], c[1], depth_scale).ok_or(
                Error::InvalidCornerDepth {
                    marker: m.id,
                    corner: ci,
                },
            )?;
            out.insert((m.id, ci), frame.intrinsics.unproject(c[0], c[1], z));
        }
    }
    Ok(out)
}

/// Rigid transform taking `source` camera coordinates to `target` camera
/// coordinates from the 3D corners of shared fiducial markers.
pub fn marker_alignment(source: &RgbdFrame, target: &RgbdFrame, depth_scale: f64) -> Result<RigidTransform> {
    let ids = |f: &RgbdFrame| -> Vec<i64> {
        let mut v: Vec<i64> = f.marker_corners.iter().flatten().map(|m| m.id).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let (src_ids, tgt_ids) = (ids(source), ids(target));
    let shared = src_ids.iter().filter(|id| tgt_ids.binary_search(id).is_ok()).count();
    if shared < 2 {
        return Err(Error::InsufficientLandmarks { shared });
    }
    let src = lift_corners(source, depth_scale)?;
    let tgt = lift_corners(target, depth_scale)?;
    let pairs = src
        .iter()
        .filter_map(|(key, p)| tgt.get(key).map(|q| (*p, *q)))
        .collect();
    rigid_from_correspondences(&CorrespondenceSet::new(pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rgbd::{CameraIntrinsics, ColorImage, DepthImage, MarkerObservation};

    fn frame_with(markers: Vec<MarkerObservation>) -> RgbdFrame {
        let k = CameraIntrinsics::new(100.0, 100.0, 32.0, 24.0, 64, 48).unwrap();
        RgbdFrame::new(
            ColorImage::filled(64, 48, [0; 3]),
            DepthImage::filled(64, 48, 500),
            k,
            0,
        )
        .unwrap()
        .with_markers(markers)
        .unwrap()
    }

    fn square(id: i64, x: f64, y: f64) -> MarkerObservation {
        MarkerObservation {
            id,
            corners: [[x, y], [x + 5.0, y], [x + 5.0, y + 5.0], [x, y + 5.0]],
        }
    }

    #[test]
    fn identical_frames_give_identity() {
        let f = frame_with(vec![square(1, 3.0, 4.0), square(7, 40.0, 30.0)]);
        let t = marker_alignment(&f, &f, 1.0).unwrap();
        assert!(t.rotation_angle() < 1e-9);
        assert!(t.translation.norm() < 1e-9);
    }

    #[test]
    fn one_shared_marker_is_not_enough() {
        let a = frame_with(vec![square(1, 3.0, 4.0), square(7, 40.0, 30.0)]);
        let b = frame_with(vec![square(1, 3.0, 4.0), square(8, 40.0, 30.0)]);
        assert!(matches!(
            marker_alignment(&a, &b, 1.0),
            Err(Error::InsufficientLandmarks { shared: 1 })
        ));
    }

    #[test]
    fn missing_corner_depth_is_reported() {
        let mut f = frame_with(vec![square(1, 3.0, 4.0), square(7, 40.0, 30.0)]);
        for y in 28..=33 {
            for x in 43..=47 {
                f.depth.set(x, y, 0);
            }
        }
        assert!(matches!(
            marker_alignment(&f, &f, 1.0),
            Err(Error::InvalidCornerDepth { marker: 7, corner: 1 })
        ));
    }

    #[test]
    fn bilinear_ignores_zero_taps() {
        let mut f = frame_with(vec![]);
        f.depth.set(10, 10, 0);
        f.depth.set(11, 10, 600);
        let z = sample_depth_bilinear(&f, 10.5, 10.0, 1.0).unwrap();
        assert_eq!(z, 600.0);
        let z = sample_depth_bilinear(&f, 10.5, 10.5, 1.0).unwrap();
        assert!((z - (600.0 + 500.0 + 500.0) / 3.0).abs() < 1e-12);
    }
}

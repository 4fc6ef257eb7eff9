use woundmesh::io::{frame_path, write_frame, write_intrinsics, Dataset, INTRINSICS_FILE};
use woundmesh::synth::{default_intrinsics, render_frame, sweep_poses, RenderOptions, SyntheticScene, SYNTH_DEPTH_SCALE};
use woundmesh::{Error, RgbdFrame};

fn rendered(n: usize) -> Vec<RgbdFrame> {
    let scene = SyntheticScene::phantom();
    sweep_poses(n)
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let opts = RenderOptions {
                depth_noise_sigma: 0.5,
                noise_seed: i as u64,
                timestamp_index: 2 * i + 1,
                ..Default::default()
            };
            render_frame(&scene, p, &default_intrinsics(), &opts).unwrap()
        })
        .collect()
}

fn write_dataset(root: &std::path::Path, frames: &[RgbdFrame]) {
    write_intrinsics(root, &default_intrinsics(), SYNTH_DEPTH_SCALE).unwrap();
    for f in frames {
        write_frame(root, f).unwrap();
    }
}

#[test]
fn frames_round_trip_through_the_directory_layout() {
    let dir = tempfile::tempdir().unwrap();
    let frames = rendered(3);
    write_dataset(dir.path(), &frames);
    let ds = Dataset::open(dir.path()).unwrap();
    assert_eq!(ds.frame_ids, vec![1, 3, 5]);
    assert_eq!(ds.depth_scale, SYNTH_DEPTH_SCALE);
    assert_eq!(ds.intrinsics, default_intrinsics());
    let loaded = ds.load_frames(None).unwrap();
    for (a, b) in frames.iter().zip(&loaded) {
        assert_eq!(a.timestamp_index, b.timestamp_index);
        assert_eq!(a.depth, b.depth);
        assert_eq!(a.color, b.color);
        assert_eq!(a.mask, b.mask);
        assert_eq!(a.marker_corners, b.marker_corners);
    }
    let subset = ds.load_frames(Some(&[5, 1])).unwrap();
    assert_eq!(subset[0].timestamp_index, 5);
    assert!(ds.load_frames(Some(&[2])).is_err());
}

#[test]
fn masks_and_markers_are_optional() {
    let dir = tempfile::tempdir().unwrap();
    let mut frames = rendered(1);
    frames[0].mask = None;
    frames[0].marker_corners = None;
    write_dataset(dir.path(), &frames);
    let f = Dataset::open(dir.path()).unwrap().load_frame(1).unwrap();
    assert!(f.mask.is_none() && f.marker_corners.is_none());
}

#[test]
fn missing_and_corrupt_inputs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(Dataset::open(dir.path()), Err(Error::Io { .. })));

    write_dataset(dir.path(), &rendered(1));
    std::fs::write(frame_path(dir.path(), 1, "depth.png"), b"not a png").unwrap();
    let ds = Dataset::open(dir.path()).unwrap();
    assert!(matches!(ds.load_frame(1), Err(Error::Format { .. })));

    std::fs::write(dir.path().join(INTRINSICS_FILE), r#"{"fx": -1, "fy": 1, "cx": 0, "cy": 0, "width": 4, "height": 4}"#)
        .unwrap();
    assert!(matches!(Dataset::open(dir.path()), Err(Error::Format { .. })));
}

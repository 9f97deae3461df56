use deform_mvs::config::FusionConfig;
use deform_mvs::eval::{default_tau, evaluate, generate_scene, SceneKind, SceneSpec, SyntheticScene};
use deform_mvs::fusion::{fuse, FusionView};
use deform_mvs::par::ExecMode;
use deform_mvs::{DepthMapBuffer, PointCloud};

fn scene() -> SyntheticScene {
    generate_scene(&SceneSpec::new(SceneKind::OcclusionBox).with_size(128, 96))
}

fn fuse_maps(s: &SyntheticScene, depths: &[DepthMapBuffer], colors: Option<&[Vec<[u8; 3]>]>) -> PointCloud {
    let views: Vec<FusionView<'_>> = (0..s.cameras.len())
        .map(|i| FusionView {
            camera: &s.cameras[i],
            depth: &depths[i],
            normals: &s.gt_normals[i],
            colors: colors.map(|c| c[i].as_slice()),
        })
        .collect();
    fuse(&views, &FusionConfig::default(), ExecMode::Parallel)
}

#[test]
fn ground_truth_maps_fuse_onto_the_ground_truth_cloud() {
    let s = scene();
    let cloud = fuse_maps(&s, &s.gt_depth, None);
    let gt = s.gt_points.positions();
    let r = evaluate(&cloud.positions(), &gt, default_tau(&gt), ExecMode::Parallel).unwrap();
    assert_eq!(r.accuracy, 100.0);
    assert!(r.completeness > 99.0, "{}", r.completeness);
    assert!(cloud.normals_are_unit());
    assert!(!cloud.has_color());
}

#[test]
fn inconsistent_view_contributes_nothing() {
    let s = scene();
    let mut depths = s.gt_depth.clone();
    let (w, h) = (depths[3].width(), depths[3].height());
    let scaled = depths[3].values().iter().map(|d| d * 1.3).collect();
    depths[3] = DepthMapBuffer::with_mask(w, h, scaled, depths[3].valid_mask().to_vec());
    let cloud = fuse_maps(&s, &depths, None);
    let gt = s.gt_points.positions();
    let r = evaluate(&cloud.positions(), &gt, default_tau(&gt), ExecMode::Parallel).unwrap();
    assert_eq!(r.accuracy, 100.0);
    assert!(r.completeness > 95.0, "{}", r.completeness);
}

#[test]
fn colours_are_carried_when_every_view_has_them() {
    let s = scene();
    let colors: Vec<Vec<[u8; 3]>> = s.scene().colors.into_iter().map(Option::unwrap).collect();
    let cloud = fuse_maps(&s, &s.gt_depth, Some(&colors));
    assert!(cloud.has_color());
    assert_eq!(cloud.len(), fuse_maps(&s, &s.gt_depth, None).len());
}

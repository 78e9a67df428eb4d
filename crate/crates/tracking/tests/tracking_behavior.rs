//! Behavior of the coarse estimator, the refinement loop, and the
//! covisibility gate on small rendered scenes.

use codec_me::{motion_field, to_luma, MotionConfig};
use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use splat_core::{
    photometric_depth_loss, render_frame, CameraIntrinsics, ColorImage, DepthImage, Frame,
    Gaussian3D, LossConfig, Pose, RenderOptions, Scene,
};
use tracking::{
    refine_pose, CoarseContext, CoarseEstimator, MotionDepthEstimator, Tracker, TrackingConfig,
};

fn intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::centered(100.0, 100.0, 48, 32)
}

fn pose_at_center(center: Vector3<f64>) -> Pose {
    Pose::new(UnitQuaternion::identity(), -center)
}

/// Textured plane of Gaussians at depth ~2.5 covering the test frustum.
fn planar_scene() -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut scene = Scene::new();
    let mut id = 0;
    for iy in -5..=5 {
        for ix in -8..=8 {
            scene.push(Gaussian3D::new(
                id,
                Vector3::new(ix as f64 * 0.1, iy as f64 * 0.08, 2.5),
                Vector3::new(0.05, 0.05, 0.05),
                UnitQuaternion::identity(),
                0.95,
                Vector3::new(rng.gen(), rng.gen(), rng.gen()),
            ));
            id += 1;
        }
    }
    scene
}

fn render_to_frame(scene: &Scene, pose: &Pose, intr: &CameraIntrinsics, id: u64) -> Frame {
    let out = render_frame(scene, pose, intr, &RenderOptions::default());
    Frame {
        id,
        timestamp: id as f64 / 30.0,
        color: out.color,
        depth: out.depth,
        gt_pose: Some(*pose),
    }
}

#[test]
fn identical_frames_return_previous_pose() {
    let intr = intrinsics();
    let scene = planar_scene();
    let pose = pose_at_center(Vector3::zeros());
    let frame = render_to_frame(&scene, &pose, &intr, 0);
    let luma = to_luma(&frame.color);
    let motion = motion_field(&luma, &luma, &MotionConfig::default());
    let ctx = CoarseContext {
        prev_pose: &pose,
        prev_delta: &Pose::identity(),
        prev_frame: &frame,
        cur_frame: &frame,
        motion: &motion,
        block_size: 8,
        intr: &intr,
    };
    let est = MotionDepthEstimator.estimate(&ctx);
    assert!((est.translation - pose.translation).norm() < 1e-6);
    assert!(est.rotation.angle_to(&pose.rotation) < 1e-6);
}

#[test]
fn lateral_translation_recovered_within_thirty_percent() {
    let intr = intrinsics();
    let scene = planar_scene();
    let p0 = pose_at_center(Vector3::zeros());
    // 0.05 world units at depth 2.5 with fx=100 is exactly 2 px of flow.
    let shift = Vector3::new(0.05, 0.0, 0.0);
    let p1 = pose_at_center(shift);
    let f0 = render_to_frame(&scene, &p0, &intr, 0);
    let f1 = render_to_frame(&scene, &p1, &intr, 1);
    let motion = motion_field(
        &to_luma(&f1.color),
        &to_luma(&f0.color),
        &MotionConfig::default(),
    );
    let ctx = CoarseContext {
        prev_pose: &p0,
        prev_delta: &Pose::identity(),
        prev_frame: &f0,
        cur_frame: &f1,
        motion: &motion,
        block_size: 8,
        intr: &intr,
    };
    let est = MotionDepthEstimator.estimate(&ctx);
    let est_center = est.camera_center();
    let err = (est_center - shift).norm();
    assert!(
        err <= 0.3 * shift.norm(),
        "estimated center {est_center:?}, error {err}"
    );
}

#[test]
fn invalid_depth_falls_back_to_constant_velocity() {
    let intr = intrinsics();
    let scene = planar_scene();
    let pose = pose_at_center(Vector3::zeros());
    let mut frame = render_to_frame(&scene, &pose, &intr, 0);
    frame.depth = DepthImage::new(frame.width(), frame.height());
    let delta = Pose::new(
        UnitQuaternion::from_euler_angles(0.0, 0.01, 0.0),
        Vector3::new(0.02, 0.0, 0.0),
    );
    let luma = to_luma(&frame.color);
    let motion = motion_field(&luma, &luma, &MotionConfig::default());
    let ctx = CoarseContext {
        prev_pose: &pose,
        prev_delta: &delta,
        prev_frame: &frame,
        cur_frame: &frame,
        motion: &motion,
        block_size: 8,
        intr: &intr,
    };
    let est = MotionDepthEstimator.estimate(&ctx);
    let expected = delta.compose(&pose);
    assert_eq!(est.translation, expected.translation);
    assert_eq!(est.rotation, expected.rotation);
}

#[test]
fn refinement_at_minimum_stays_put() {
    let intr = intrinsics();
    let scene = planar_scene();
    let gt = pose_at_center(Vector3::new(0.02, -0.01, 0.0));
    let frame = render_to_frame(&scene, &gt, &intr, 0);
    let refined = refine_pose(
        &gt,
        &frame,
        &scene,
        &intr,
        &TrackingConfig::default(),
        &RenderOptions::default(),
        &LossConfig::default(),
    );
    let rot_err = (refined.rotation.to_rotation_matrix().matrix()
        - gt.rotation.to_rotation_matrix().matrix())
    .norm();
    let trans_err = (refined.translation - gt.translation).norm();
    assert!(rot_err + trans_err < 1e-4, "moved {}", rot_err + trans_err);
}

#[test]
fn zero_iterations_return_input() {
    let intr = intrinsics();
    let scene = planar_scene();
    let pose = pose_at_center(Vector3::zeros());
    let frame = render_to_frame(&scene, &pose, &intr, 0);
    let cfg = TrackingConfig {
        iter_t: 0,
        ..Default::default()
    };
    let refined = refine_pose(
        &pose,
        &frame,
        &scene,
        &intr,
        &cfg,
        &RenderOptions::default(),
        &LossConfig::default(),
    );
    assert_eq!(refined, pose);
}

#[test]
fn refinement_never_increases_best_loss() {
    let intr = intrinsics();
    let scene = planar_scene();
    let gt = pose_at_center(Vector3::zeros());
    let frame = render_to_frame(&scene, &gt, &intr, 0);
    // ~1 degree rotation plus 0.02 translation away from the optimum.
    let perturbed = Pose::new(
        UnitQuaternion::from_euler_angles(0.0, 0.017, 0.0),
        Vector3::new(0.02, 0.0, 0.0),
    )
    .compose(&gt);
    let loss_at = |p: &Pose| {
        let out = render_frame(&scene, p, &intr, &RenderOptions::default());
        photometric_depth_loss(&out.color, &out.depth, &frame, &LossConfig::default())
    };
    let initial = loss_at(&perturbed);
    let refined = refine_pose(
        &perturbed,
        &frame,
        &scene,
        &intr,
        &TrackingConfig::default(),
        &RenderOptions::default(),
        &LossConfig::default(),
    );
    let final_loss = loss_at(&refined);
    assert!(
        final_loss <= initial,
        "refinement worsened loss: {initial} -> {final_loss}"
    );
}

fn noise_frame(seed: u64, intr: &CameraIntrinsics) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut color = ColorImage::new(intr.width, intr.height);
    for p in color.pixels_mut() {
        *p = Vector3::new(rng.gen(), rng.gen(), rng.gen());
    }
    let mut depth = DepthImage::new(intr.width, intr.height);
    for y in 0..intr.height {
        for x in 0..intr.width {
            depth.set(x, y, 2.0);
        }
    }
    Frame {
        id: 0,
        timestamp: 0.0,
        color,
        depth,
        gt_pose: None,
    }
}

#[test]
fn gate_follows_covisibility_exactly() {
    let intr = intrinsics();
    let scene = planar_scene();
    let pose = pose_at_center(Vector3::zeros());
    let frame = render_to_frame(&scene, &pose, &intr, 0);
    let cfg = TrackingConfig::default();
    let opts = RenderOptions::default();
    let loss_cfg = LossConfig::default();

    let mut tracker = Tracker::new(pose, MotionConfig::default());
    let first = tracker.track(&frame, &scene, &intr, &cfg, &opts, &loss_cfg);
    assert!(first.used_refinement, "first frame always refines");

    // Identical consecutive frame: fc = 1 >= thresh, no refinement.
    let mut f1 = frame.clone();
    f1.id = 1;
    let second = tracker.track(&f1, &scene, &intr, &cfg, &opts, &loss_cfg);
    assert_eq!(second.covis.fc, 1.0);
    assert!(!second.used_refinement);
    assert_eq!(second.used_refinement, second.covis.fc < cfg.thresh_t);

    // Unrelated noise frame: fc < thresh, refinement fires.
    let noisy = noise_frame(3, &intr);
    let third = tracker.track(&noisy, &scene, &intr, &cfg, &opts, &loss_cfg);
    assert!(third.covis.fc < cfg.thresh_t, "fc {}", third.covis.fc);
    assert!(third.used_refinement);
}

#[test]
fn boundary_threshold_semantics() {
    let intr = intrinsics();
    let scene = planar_scene();
    let pose = pose_at_center(Vector3::zeros());
    let frame = render_to_frame(&scene, &pose, &intr, 0);
    let opts = RenderOptions::default();
    let loss_cfg = LossConfig::default();

    // thresh_t = 0: never refine, not even the first frame (fc = 0 is not < 0).
    let cfg0 = TrackingConfig {
        thresh_t: 0.0,
        ..Default::default()
    };
    let mut tracker = Tracker::new(pose, MotionConfig::default());
    let out = tracker.track(&frame, &scene, &intr, &cfg0, &opts, &loss_cfg);
    assert!(!out.used_refinement);
    let mut f1 = frame.clone();
    f1.id = 1;
    let out = tracker.track(&f1, &scene, &intr, &cfg0, &opts, &loss_cfg);
    assert!(!out.used_refinement);

    // thresh_t = 1: every frame with any content change refines.
    let cfg1 = TrackingConfig {
        thresh_t: 1.0,
        iter_t: 2,
        ..Default::default()
    };
    let mut tracker = Tracker::new(pose, MotionConfig::default());
    tracker.track(&frame, &scene, &intr, &cfg1, &opts, &loss_cfg);
    let shifted = render_to_frame(&scene, &pose_at_center(Vector3::new(0.03, 0.0, 0.0)), &intr, 1);
    let out = tracker.track(&shifted, &scene, &intr, &cfg1, &opts, &loss_cfg);
    assert!(out.covis.fc < 1.0);
    assert!(out.used_refinement);
}

#[test]
fn tracking_never_mutates_the_scene() {
    let intr = intrinsics();
    let scene = planar_scene();
    let snapshot = scene.clone();
    let pose = pose_at_center(Vector3::zeros());
    let mut tracker = Tracker::new(pose, MotionConfig::default());
    let cfg = TrackingConfig::default();
    for i in 0..3u64 {
        let p = pose_at_center(Vector3::new(i as f64 * 0.02, 0.0, 0.0));
        let frame = render_to_frame(&scene, &p, &intr, i);
        tracker.track(
            &frame,
            &scene,
            &intr,
            &cfg,
            &RenderOptions::default(),
            &LossConfig::default(),
        );
    }
    assert_eq!(scene, snapshot);
}

#[test]
fn slow_pan_refines_under_half_the_frames() {
    let intr = intrinsics();
    let scene = planar_scene();
    let cfg = TrackingConfig::default();
    let opts = RenderOptions::default();
    let loss_cfg = LossConfig::default();
    let px_step = 2.5 / 100.0; // one pixel per frame at the plane depth
    let mut tracker = Tracker::new(pose_at_center(Vector3::zeros()), MotionConfig::default());
    let mut refined = 0;
    let n = 20;
    for i in 0..n {
        let p = pose_at_center(Vector3::new(i as f64 * px_step, 0.0, 0.0));
        let frame = render_to_frame(&scene, &p, &intr, i);
        if tracker
            .track(&frame, &scene, &intr, &cfg, &opts, &loss_cfg)
            .used_refinement
        {
            refined += 1;
        }
    }
    assert!(
        refined * 2 < n,
        "{refined} of {n} frames refined on a slow pan"
    );
}

//! Shared scene builders for the splat-core integration tests.

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use splat_core::{CameraIntrinsics, ColorImage, DepthImage, Frame, Gaussian3D, Pose, Scene};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn test_intrinsics(width: usize, height: usize) -> CameraIntrinsics {
    CameraIntrinsics::centered(0.9 * width as f64, 0.9 * width as f64, width, height)
}

pub fn random_unit_quaternion(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    UnitQuaternion::from_euler_angles(
        rng.gen_range(-3.0..3.0),
        rng.gen_range(-3.0..3.0),
        rng.gen_range(-3.0..3.0),
    )
}

/// Gaussians sampled inside the view frustum of `pose`, with opacities kept
/// away from the alpha clamp so gradients stay smooth.
pub fn random_scene(
    rng: &mut ChaCha8Rng,
    intr: &CameraIntrinsics,
    pose: &Pose,
    count: usize,
    max_opacity: f64,
) -> Scene {
    let cam_to_world = pose.inverse();
    let mut scene = Scene::new();
    for i in 0..count {
        let u = rng.gen_range(2.0..(intr.width as f64 - 3.0));
        let v = rng.gen_range(2.0..(intr.height as f64 - 3.0));
        let depth = rng.gen_range(1.5..4.0);
        let mu = cam_to_world.transform_point(&intr.backproject(u, v, depth));
        scene.push(Gaussian3D::new(
            i as u64,
            mu,
            Vector3::new(
                rng.gen_range(0.05..0.3),
                rng.gen_range(0.05..0.3),
                rng.gen_range(0.05..0.3),
            ),
            random_unit_quaternion(rng),
            rng.gen_range(0.2..max_opacity),
            Vector3::new(rng.gen(), rng.gen(), rng.gen()),
        ));
    }
    scene
}

/// A synthetic observation with smooth non-trivial color and valid depth at
/// every pixel, so both loss terms contribute everywhere.
pub fn patterned_frame(width: usize, height: usize) -> Frame {
    let mut color = ColorImage::new(width, height);
    let mut depth = DepthImage::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let fx = x as f64 / width as f64;
            let fy = y as f64 / height as f64;
            color.set(
                x,
                y,
                Vector3::new(
                    0.3 + 0.2 * (6.0 * fx).sin().abs(),
                    0.4 + 0.2 * (5.0 * fy).cos().abs(),
                    0.35 + 0.15 * (4.0 * (fx + fy)).sin().abs(),
                ),
            );
            depth.set(x, y, 2.0 + 0.5 * fx + 0.3 * fy);
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

pub fn tilted_pose() -> Pose {
    Pose::new(
        UnitQuaternion::from_euler_angles(0.08, -0.12, 0.05),
        Vector3::new(0.15, -0.1, 0.2),
    )
}

/// Per-pixel sequences of evaluated Gaussian ids. Two parameter settings
/// lie on the same smooth piece of the objective exactly when their
/// signatures agree (no support-boundary or termination crossing between
/// them), which is the precondition for central differences to be a valid
/// oracle of the piecewise-smooth rasterizer.
pub fn eval_signature(
    scene: &splat_core::Scene,
    pose: &Pose,
    intr: &CameraIntrinsics,
) -> Vec<Vec<u64>> {
    let out = splat_core::render_frame(scene, pose, intr, &splat_core::RenderOptions::default());
    out.aux
        .evals
        .iter()
        .map(|evals| evals.iter().map(|e| e.id).collect())
        .collect()
}

/// Observation built from the scene's own render, pushed away from it by a
/// parity-varying offset. Every residual has magnitude >= 0.1, so the L1
/// terms are smooth in a finite-difference-sized neighborhood and central
/// differences are a valid oracle.
pub fn offset_observation(
    scene: &splat_core::Scene,
    pose: &Pose,
    intr: &CameraIntrinsics,
) -> Frame {
    let out = splat_core::render_frame(scene, pose, intr, &splat_core::RenderOptions::default());
    let mut color = ColorImage::new(intr.width, intr.height);
    let mut depth = DepthImage::new(intr.width, intr.height);
    for y in 0..intr.height {
        for x in 0..intr.width {
            let rendered = out.color.get(x, y);
            let mut c = Vector3::zeros();
            for ch in 0..3 {
                let magnitude = 0.12 + 0.05 * ((x + y + ch) % 2) as f64;
                c[ch] = if rendered[ch] < 0.5 {
                    rendered[ch] + magnitude
                } else {
                    rendered[ch] - magnitude
                };
            }
            color.set(x, y, c);
            let rd = out.depth.get(x, y);
            let dm = 0.25 + 0.1 * ((x + y) % 2) as f64;
            depth.set(x, y, if rd > dm + 0.05 { rd - dm } else { rd + dm });
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

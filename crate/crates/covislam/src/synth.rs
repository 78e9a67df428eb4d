//! Deterministic synthetic RGB-D sequences rendered from a ground-truth
//! Gaussian scene.

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use splat_core::{
    render_frame, CameraIntrinsics, Frame, Gaussian3D, Pose, RenderOptions, Scene,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    Static,
    Pan,
    Orbit,
    RandomWalk,
}

impl std::str::FromStr for TrajectoryKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(Self::Static),
            "pan" => Ok(Self::Pan),
            "orbit" => Ok(Self::Orbit),
            "random-walk" | "random_walk" => Ok(Self::RandomWalk),
            other => Err(format!("unknown trajectory kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    /// Focal length as a multiple of the image width.
    pub focal_scale: f64,
    pub gaussians: usize,
    pub frames: usize,
    pub trajectory: TrajectoryKind,
    /// Lateral pan speed in pixels per frame at the reference depth.
    pub pan_px_per_frame: f64,
    pub orbit_deg_per_frame: f64,
    pub walk_step: f64,
    /// Color noise amplitude added to the rendered frames.
    pub noise: f64,
    pub seed: u64,
    /// Extra sampling margin around the base frustum, in pixels, so panned
    /// views stay textured.
    pub margin_px: f64,
    pub depth_center: f64,
    pub depth_spread: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 96,
            height: 64,
            focal_scale: 0.9,
            gaussians: 300,
            frames: 30,
            trajectory: TrajectoryKind::Pan,
            pan_px_per_frame: 1.0,
            orbit_deg_per_frame: 1.0,
            walk_step: 0.01,
            noise: 0.0,
            seed: 7,
            margin_px: 48.0,
            depth_center: 3.0,
            depth_spread: 0.8,
        }
    }
}

impl SceneSpec {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics::centered(
            self.focal_scale * self.width as f64,
            self.focal_scale * self.width as f64,
            self.width,
            self.height,
        )
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub spec: SceneSpec,
    pub gaussians: Scene,
    pub trajectory: Vec<Pose>,
    pub frames: Vec<Frame>,
}

/// World-to-camera pose for a camera at `eye` looking at `target`, with the
/// world +y axis as "down" (matching the pixel convention).
pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>) -> Pose {
    let forward = (target - eye).normalize();
    let world_down = Vector3::new(0.0, 1.0, 0.0);
    let down = (world_down - forward * world_down.dot(&forward)).normalize();
    let right = down.cross(&forward);
    let r = nalgebra::Matrix3::from_rows(&[
        right.transpose(),
        down.transpose(),
        forward.transpose(),
    ]);
    let rotation = UnitQuaternion::from_matrix(&r);
    Pose::new(rotation, -(rotation * eye))
}

pub fn pose_with_center(center: Vector3<f64>) -> Pose {
    Pose::new(UnitQuaternion::identity(), -center)
}

/// Ground-truth Gaussians sampled over the (margin-extended) base frustum.
pub fn ground_truth_scene(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Scene {
    let intr = spec.intrinsics();
    let mut scene = Scene::new();
    for i in 0..spec.gaussians {
        let u = rng.gen_range(-spec.margin_px..(intr.width as f64 + spec.margin_px));
        let v = rng.gen_range(-spec.margin_px / 2.0..(intr.height as f64 + spec.margin_px / 2.0));
        let depth = spec.depth_center + rng.gen_range(-spec.depth_spread..spec.depth_spread);
        let mu = intr.backproject(u, v, depth);
        let sigma_px = rng.gen_range(1.5..4.0);
        let sigma = sigma_px * depth / intr.fx;
        scene.push(Gaussian3D::new(
            i as u64,
            mu,
            Vector3::new(sigma, sigma, sigma) * rng.gen_range(0.7..1.3),
            UnitQuaternion::from_euler_angles(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            ),
            rng.gen_range(0.6..1.0),
            Vector3::new(
                rng.gen_range(0.05..1.0),
                rng.gen_range(0.05..1.0),
                rng.gen_range(0.05..1.0),
            ),
        ));
    }
    scene
}

pub fn trajectory(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Vec<Pose> {
    let intr = spec.intrinsics();
    let step_world = spec.pan_px_per_frame * spec.depth_center / intr.fx;
    match spec.trajectory {
        TrajectoryKind::Static => vec![pose_with_center(Vector3::zeros()); spec.frames],
        TrajectoryKind::Pan => (0..spec.frames)
            .map(|i| pose_with_center(Vector3::new(i as f64 * step_world, 0.0, 0.0)))
            .collect(),
        TrajectoryKind::Orbit => {
            let center = Vector3::new(0.0, 0.0, spec.depth_center);
            let radius = spec.depth_center;
            (0..spec.frames)
                .map(|i| {
                    let angle = (i as f64 * spec.orbit_deg_per_frame).to_radians();
                    let eye = center + Vector3::new(angle.sin(), 0.0, -angle.cos()) * radius;
                    look_at(eye, center)
                })
                .collect()
        }
        TrajectoryKind::RandomWalk => {
            let mut poses = vec![pose_with_center(Vector3::zeros())];
            for _ in 1..spec.frames {
                let delta = Pose::new(
                    UnitQuaternion::from_euler_angles(
                        rng.gen_range(-0.01..0.01),
                        rng.gen_range(-0.01..0.01),
                        rng.gen_range(-0.005..0.005),
                    ),
                    Vector3::new(
                        rng.gen_range(-spec.walk_step..spec.walk_step),
                        rng.gen_range(-spec.walk_step..spec.walk_step),
                        rng.gen_range(-spec.walk_step..spec.walk_step),
                    ),
                );
                poses.push(delta.compose(poses.last().unwrap()));
            }
            poses
        }
    }
}

/// Renders ground-truth frames along explicit poses, with optional seeded
/// color noise. Depth comes from the blended depth channel.
pub fn render_sequence(
    gaussians: &Scene,
    poses: &[Pose],
    intr: &CameraIntrinsics,
    noise: f64,
    seed: u64,
) -> Vec<Frame> {
    let opts = RenderOptions::default();
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x517c_c1b7_2722_0a95);
    poses
        .iter()
        .enumerate()
        .map(|(i, pose)| {
            let out = render_frame(gaussians, pose, intr, &opts);
            let mut color = out.color;
            if noise > 0.0 {
                for p in color.pixels_mut() {
                    *p = (*p
                        + Vector3::new(
                            noise_rng.gen_range(-noise..noise),
                            noise_rng.gen_range(-noise..noise),
                            noise_rng.gen_range(-noise..noise),
                        ))
                    .map(|c| c.clamp(0.0, 1.0));
                }
            }
            Frame {
                id: i as u64,
                timestamp: i as f64 / 30.0,
                color,
                depth: out.depth,
                gt_pose: Some(*pose),
            }
        })
        .collect()
}

/// Deterministic end-to-end generation: ground truth, trajectory, frames.
pub fn generate_synthetic(spec: &SceneSpec) -> SyntheticScene {
    assert!(spec.gaussians >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gaussians = ground_truth_scene(spec, &mut rng);
    let poses = trajectory(spec, &mut rng);
    let frames = render_sequence(&gaussians, &poses, &spec.intrinsics(), spec.noise, spec.seed);
    SyntheticScene {
        spec: spec.clone(),
        gaussians,
        trajectory: poses,
        frames,
    }
}

//! Movement-adaptive pose tracking.
//!
//! Every frame gets a cheap coarse pose estimate derived from the CODEC
//! motion field and the previous frame's depth. Frames whose covisibility
//! with the previous frame falls below `thresh_t` additionally run a short
//! gradient-descent refinement of the pose against the current map; frames
//! at or above the threshold keep the coarse estimate. The map is never
//! mutated here.

use codec_me::{covisibility_of_field, motion_field, to_luma, CovisibilityReport, MotionConfig,
    MotionResult};
use nalgebra::{Matrix3, UnitQuaternion, Vector3, Vector6};
use splat_core::{
    photometric_depth_loss, pose_gradient, render_frame, CameraIntrinsics, Frame, LossConfig,
    Pose, RenderOptions, Scene,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingConfig {
    /// Covisibility gate: refinement runs iff `fc < thresh_t`.
    pub thresh_t: f64,
    /// Refinement iterations when the gate fires.
    pub iter_t: u32,
    /// Refinement step size.
    pub pose_lr: f64,
    /// Run refinement on every frame regardless of covisibility (used by the
    /// non-adaptive baseline pipeline).
    pub force_refinement: bool,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            thresh_t: 0.90,
            iter_t: 20,
            pose_lr: 2e-3,
            force_refinement: false,
        }
    }
}

/// Context handed to a coarse estimator.
pub struct CoarseContext<'a> {
    pub prev_pose: &'a Pose,
    /// Inter-frame delta from the previous tracking step (constant-velocity
    /// fallback).
    pub prev_delta: &'a Pose,
    pub prev_frame: &'a Frame,
    pub cur_frame: &'a Frame,
    pub motion: &'a [MotionResult],
    pub block_size: usize,
    pub intr: &'a CameraIntrinsics,
}

/// Pluggable coarse pose estimation. Implementations must be deterministic
/// functions of the context.
pub trait CoarseEstimator {
    fn estimate(&self, ctx: &CoarseContext) -> Pose;
}

/// Default estimator: median motion vector plus depth back-projection,
/// solved as an orthogonal Procrustes alignment.
///
/// The median motion vector `m` gives a global image-plane displacement from
/// the current frame into the previous one. Block centers with valid
/// previous-frame depth yield 3D correspondences (previous camera frame vs
/// current camera frame at the same depth); the least-squares rigid
/// transform between them composes onto the previous pose. Fewer than three
/// correspondences falls back to constant velocity.
pub struct MotionDepthEstimator;

impl CoarseEstimator for MotionDepthEstimator {
    fn estimate(&self, ctx: &CoarseContext) -> Pose {
        let valid_mvs: Vec<(f64, f64)> = ctx
            .motion
            .iter()
            .filter(|m| {
                let cx = (m.origin_x + ctx.block_size / 2) as i64 + m.dx as i64;
                let cy = (m.origin_y + ctx.block_size / 2) as i64 + m.dy as i64;
                in_bounds(ctx.prev_frame, cx, cy)
                    && ctx.prev_frame.depth.is_valid(cx as usize, cy as usize)
            })
            .map(|m| (m.dx as f64, m.dy as f64))
            .collect();
        if valid_mvs.len() < 3 {
            return constant_velocity(ctx.prev_pose, ctx.prev_delta);
        }
        let mdx = median(valid_mvs.iter().map(|v| v.0));
        let mdy = median(valid_mvs.iter().map(|v| v.1));

        // Correspondences: current block center <-> previous position shifted
        // by the median vector, back-projected at the previous frame's depth.
        let mut prev_pts = Vec::new();
        let mut cur_pts = Vec::new();
        for m in ctx.motion {
            let cx = (m.origin_x + ctx.block_size / 2) as f64;
            let cy = (m.origin_y + ctx.block_size / 2) as f64;
            let px = cx + mdx;
            let py = cy + mdy;
            let sx = px.round() as i64;
            let sy = py.round() as i64;
            if !in_bounds(ctx.prev_frame, sx, sy) {
                continue;
            }
            let (sx, sy) = (sx as usize, sy as usize);
            if !ctx.prev_frame.depth.is_valid(sx, sy) {
                continue;
            }
            let depth = ctx.prev_frame.depth.get(sx, sy);
            prev_pts.push(ctx.intr.backproject(px, py, depth));
            cur_pts.push(ctx.intr.backproject(cx, cy, depth));
        }
        if prev_pts.len() < 3 {
            return constant_velocity(ctx.prev_pose, ctx.prev_delta);
        }
        let delta = rigid_align(&prev_pts, &cur_pts);
        delta.compose(ctx.prev_pose)
    }
}

fn in_bounds(frame: &Frame, x: i64, y: i64) -> bool {
    x >= 0 && y >= 0 && (x as usize) < frame.width() && (y as usize) < frame.height()
}

fn constant_velocity(prev_pose: &Pose, prev_delta: &Pose) -> Pose {
    prev_delta.compose(prev_pose)
}

fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares rigid transform mapping `src` points onto `dst` points
/// (Kabsch with reflection fix).
pub fn rigid_align(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Pose {
    assert_eq!(src.len(), dst.len());
    assert!(src.len() >= 3);
    let n = src.len() as f64;
    let centroid_src: Vector3<f64> = src.iter().sum::<Vector3<f64>>() / n;
    let centroid_dst: Vector3<f64> = dst.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::<f64>::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - centroid_src) * (d - centroid_dst).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = v_t.transpose() * u.transpose();
    if r.determinant() < 0.0 {
        let mut flip = Matrix3::identity();
        flip[(2, 2)] = -1.0;
        r = v_t.transpose() * flip * u.transpose();
    }
    let rotation = UnitQuaternion::from_matrix(&r);
    let translation = centroid_dst - r * centroid_src;
    Pose::new(rotation, translation)
}

/// `iter_t` gradient-descent steps on the pose with the map held fixed;
/// returns the pose with the lowest observed loss across all visited poses.
pub fn refine_pose(
    pose: &Pose,
    frame: &Frame,
    scene: &Scene,
    intr: &CameraIntrinsics,
    cfg: &TrackingConfig,
    render_opts: &RenderOptions,
    loss_cfg: &LossConfig,
) -> Pose {
    if cfg.iter_t == 0 {
        return *pose;
    }
    let mut current = *pose;
    let mut best = *pose;
    let mut best_loss = f64::INFINITY;
    for _ in 0..cfg.iter_t {
        let (grad, loss) = pose_gradient(scene, &current, intr, frame, render_opts, loss_cfg);
        if loss < best_loss {
            best_loss = loss;
            best = current;
        }
        let step: Vector6<f64> = -grad * cfg.pose_lr;
        current = current.perturb_left(&step);
    }
    let out = render_frame(scene, &current, intr, render_opts);
    let final_loss = photometric_depth_loss(&out.color, &out.depth, frame, loss_cfg);
    if final_loss < best_loss {
        best = current;
    }
    best
}

#[derive(Debug, Clone)]
pub struct TrackOutcome {
    pub pose: Pose,
    pub coarse_pose: Pose,
    pub used_refinement: bool,
    pub covis: CovisibilityReport,
    /// Motion field against the previous frame (empty for the first frame).
    pub motion: Vec<MotionResult>,
}

struct PrevState {
    pose: Pose,
    frame: Frame,
    delta: Pose,
}

/// Streaming tracker; owns the previous-frame state and the coarse
/// estimator. Never mutates the scene it reads.
pub struct Tracker {
    estimator: Box<dyn CoarseEstimator>,
    me_cfg: MotionConfig,
    initial_pose: Pose,
    prev: Option<PrevState>,
}

impl Tracker {
    pub fn new(initial_pose: Pose, me_cfg: MotionConfig) -> Self {
        Self {
            estimator: Box::new(MotionDepthEstimator),
            me_cfg,
            initial_pose,
            prev: None,
        }
    }

    pub fn with_estimator(mut self, estimator: Box<dyn CoarseEstimator>) -> Self {
        self.estimator = estimator;
        self
    }

    /// Tracks one frame against the current map. The first frame has no
    /// previous frame: its covisibility is reported as 0 (level 1), so the
    /// gate fires and the initial pose is refined against whatever map
    /// exists.
    pub fn track(
        &mut self,
        cur_frame: &Frame,
        scene: &Scene,
        intr: &CameraIntrinsics,
        cfg: &TrackingConfig,
        render_opts: &RenderOptions,
        loss_cfg: &LossConfig,
    ) -> TrackOutcome {
        let (coarse, covis, motion) = match &self.prev {
            None => (
                self.initial_pose,
                CovisibilityReport {
                    total_sad: (cur_frame.width() * cur_frame.height() * 255) as u64,
                    fc: 0.0,
                    level: 1,
                },
                Vec::new(),
            ),
            Some(prev) => {
                let cur_luma = to_luma(&cur_frame.color);
                let prev_luma = to_luma(&prev.frame.color);
                let motion = motion_field(&cur_luma, &prev_luma, &self.me_cfg);
                let covis =
                    covisibility_of_field(&motion, cur_frame.width(), cur_frame.height());
                let ctx = CoarseContext {
                    prev_pose: &prev.pose,
                    prev_delta: &prev.delta,
                    prev_frame: &prev.frame,
                    cur_frame,
                    motion: &motion,
                    block_size: self.me_cfg.block_size,
                    intr,
                };
                (self.estimator.estimate(&ctx), covis, motion)
            }
        };

        let gate_fires = covis.fc < cfg.thresh_t;
        let used_refinement = cfg.force_refinement || gate_fires;
        let pose = if used_refinement {
            refine_pose(&coarse, cur_frame, scene, intr, cfg, render_opts, loss_cfg)
        } else {
            coarse
        };

        let delta = match &self.prev {
            Some(prev) => pose.compose(&prev.pose.inverse()),
            None => Pose::identity(),
        };
        self.prev = Some(PrevState {
            pose,
            frame: cur_frame.clone(),
            delta,
        });

        TrackOutcome {
            pose,
            coarse_pose: coarse,
            used_refinement,
            covis,
            motion,
        }
    }
}

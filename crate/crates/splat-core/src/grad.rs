//! Analytic reverse-mode gradients of the photometric + depth objective with
//! respect to Gaussian parameters and camera pose.
//!
//! The forward pass is the tiled renderer itself; the backward pass replays
//! each pixel's evaluated list from [`RenderAux`], so gradients flow through
//! exactly the alphas that were blended (support-culled or terminated
//! Gaussians get none). Quaternion gradients are defined with respect to raw
//! components, with the forward normalization accounted for by projecting
//! out the radial direction.

use crate::frame::Frame;
use crate::loss::{photometric_depth_loss, LossConfig};
use crate::project::{project_gaussians, projection_jacobian, Gaussian2D};
use crate::render::{render_projected, RenderOptions, RenderOutput, ALPHA_CLAMP};
use crate::types::{skew3, CameraIntrinsics, GaussianId, Pose, Scene};
use nalgebra::{Matrix2, Matrix3, Quaternion, Vector2, Vector3, Vector6};
use std::collections::BTreeSet;

/// Loss gradient for one Gaussian's parameter groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianGrad {
    pub mu: Vector3<f64>,
    pub scale: Vector3<f64>,
    pub rotation: Quaternion<f64>,
    pub opacity: f64,
    pub color: Vector3<f64>,
}

impl Default for GaussianGrad {
    fn default() -> Self {
        Self {
            mu: Vector3::zeros(),
            scale: Vector3::zeros(),
            rotation: Quaternion::new(0.0, 0.0, 0.0, 0.0),
            opacity: 0.0,
            color: Vector3::zeros(),
        }
    }
}

impl GaussianGrad {
    pub fn is_zero(&self) -> bool {
        self.mu == Vector3::zeros()
            && self.scale == Vector3::zeros()
            && self.rotation.coords == nalgebra::Vector4::zeros()
            && self.opacity == 0.0
            && self.color == Vector3::zeros()
    }

    pub fn add_assign(&mut self, other: &GaussianGrad) {
        self.mu += other.mu;
        self.scale += other.scale;
        self.rotation += other.rotation;
        self.opacity += other.opacity;
        self.color += other.color;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneGrads {
    /// Parallel to `scene.gaussians`.
    pub grads: Vec<GaussianGrad>,
    pub loss: f64,
}

impl SceneGrads {
    pub fn accumulate(&mut self, other: &SceneGrads) {
        assert_eq!(self.grads.len(), other.grads.len());
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.add_assign(b);
        }
        self.loss += other.loss;
    }
}

/// Camera-frame intermediates needed to assemble the pose gradient.
#[derive(Debug, Clone)]
pub struct CamIntermediates {
    pub x_cam: Vector3<f64>,
    pub m_cam: Matrix3<f64>,
    pub dl_dxcam: Vector3<f64>,
    pub dl_dmcam: Matrix3<f64>,
}

#[derive(Debug, Clone)]
pub struct BackwardOutput {
    pub loss: f64,
    pub render: RenderOutput,
    pub grads: Vec<GaussianGrad>,
    /// Parallel to `scene.gaussians`; `None` where the Gaussian was culled or
    /// skipped.
    pub cam: Vec<Option<CamIntermediates>>,
}

fn sign(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Full forward + backward pass over one frame.
pub fn backward_pass(
    scene: &Scene,
    pose: &Pose,
    intr: &CameraIntrinsics,
    frame: &Frame,
    opts: &RenderOptions,
    loss_cfg: &LossConfig,
    skip: Option<&BTreeSet<GaussianId>>,
) -> BackwardOutput {
    // Forward: identical to the functional render path.
    let mut scene_index_of: Vec<usize> = Vec::new();
    let mut g2ds: Vec<Gaussian2D> = Vec::new();
    {
        let projected = project_gaussians(&scene.gaussians, pose, intr);
        // project_gaussians preserves order, so re-derive scene indices.
        let mut cursor = 0usize;
        for g2d in projected {
            while scene.gaussians[cursor].id != g2d.id {
                cursor += 1;
            }
            if skip.map_or(true, |s| !s.contains(&g2d.id)) {
                scene_index_of.push(cursor);
                g2ds.push(g2d);
            }
            cursor += 1;
        }
    }
    let render = render_projected(&g2ds, intr, opts);
    let loss = photometric_depth_loss(&render.color, &render.depth, frame, loss_cfg);

    // id -> projected index, for replaying aux eval lists.
    let mut by_id: Vec<(GaussianId, usize)> =
        g2ds.iter().enumerate().map(|(i, g)| (g.id, i)).collect();
    by_id.sort_unstable_by_key(|(id, _)| *id);
    let proj_of = |id: GaussianId| -> usize {
        let pos = by_id
            .binary_search_by_key(&id, |(gid, _)| *gid)
            .expect("aux eval refers to projected gaussian");
        by_id[pos].1
    };

    let n_pixels = (intr.width * intr.height) as f64;
    let n_valid_depth = frame
        .depth
        .samples()
        .iter()
        .filter(|d| d.is_finite() && **d > 0.0)
        .count();

    // Per projected Gaussian accumulators over all pixels.
    let n = g2ds.len();
    let mut acc_mean2d = vec![Vector2::<f64>::zeros(); n];
    let mut acc_inv_cov = vec![Matrix2::<f64>::zeros(); n];
    let mut acc_opacity = vec![0.0_f64; n];
    let mut acc_color = vec![Vector3::<f64>::zeros(); n];
    let mut acc_depth = vec![0.0_f64; n];
    let inv_covs: Vec<Matrix2<f64>> = g2ds.iter().map(|g| crate::render::invert2(&g.cov2d)).collect();

    let mut evals_scratch: Vec<(usize, f64, f64)> = Vec::new(); // (proj idx, alpha, t_before)
    for py in 0..intr.height {
        for px in 0..intr.width {
            let idx = py * intr.width + px;
            let pixel_evals = &render.aux.evals[idx];
            if pixel_evals.is_empty() {
                continue;
            }
            let pixel = Vector2::new(px as f64, py as f64);

            // Residual signs at this pixel.
            let rendered_c = render.color.get(px, py);
            let observed_c = frame.color.get(px, py);
            let dl_dc = Vector3::new(
                sign(rendered_c.x - observed_c.x),
                sign(rendered_c.y - observed_c.y),
                sign(rendered_c.z - observed_c.z),
            ) / n_pixels;
            let obs_d = frame.depth.get(px, py);
            let dl_dd = if obs_d.is_finite() && obs_d > 0.0 && n_valid_depth > 0 {
                loss_cfg.lambda_depth * sign(render.depth.get(px, py) - obs_d)
                    / n_valid_depth as f64
            } else {
                0.0
            };

            // Rebuild the transmittance sequence for this pixel.
            evals_scratch.clear();
            let mut t = 1.0_f64;
            for eval in pixel_evals {
                let pi = proj_of(eval.id);
                evals_scratch.push((pi, eval.alpha, t));
                t *= 1.0 - eval.alpha;
            }

            // Reverse sweep with suffix color/depth accumulators.
            let mut suffix_c = Vector3::<f64>::zeros();
            let mut suffix_d = 0.0_f64;
            for &(pi, alpha, t_before) in evals_scratch.iter().rev() {
                let g = &g2ds[pi];
                let weight = t_before * alpha;
                acc_color[pi] += dl_dc * weight;
                acc_depth[pi] += dl_dd * weight;

                let dc_dalpha = g.color * t_before - suffix_c / (1.0 - alpha);
                let dd_dalpha = g.depth * t_before - suffix_d / (1.0 - alpha);
                let dl_dalpha = dl_dc.dot(&dc_dalpha) + dl_dd * dd_dalpha;

                suffix_c += g.color * weight;
                suffix_d += g.depth * weight;

                if alpha >= ALPHA_CLAMP {
                    continue; // clamped: no gradient into opacity or geometry
                }
                let d = pixel - g.mean2d;
                let ad = inv_covs[pi] * d;
                let q = d.dot(&ad);
                let falloff = (-0.5 * q).exp();
                acc_opacity[pi] += falloff * dl_dalpha;
                let dl_dq = -0.5 * g.opacity * falloff * dl_dalpha;
                acc_mean2d[pi] += ad * (-2.0 * dl_dq);
                acc_inv_cov[pi] += (d * d.transpose()) * dl_dq;
            }
        }
    }

    // Chain per-Gaussian screen-space gradients back to world parameters.
    let w_rot = pose.rotation_matrix();
    let mut grads = vec![GaussianGrad::default(); scene.gaussians.len()];
    let mut cam: Vec<Option<CamIntermediates>> = vec![None; scene.gaussians.len()];
    for pi in 0..g2ds.len() {
        let si = scene_index_of[pi];
        let g3 = &scene.gaussians[si];
        let x_cam = pose.transform_point(&g3.mu);
        let m_cam: Matrix3<f64> = w_rot * g3.covariance() * w_rot.transpose();
        let jac = projection_jacobian(intr, &x_cam);

        // d(quadratic form)/d(inv cov) -> d/d(cov2d); the dilation is additive
        // so the gradient passes through to J M J^T unchanged.
        let a = inv_covs[pi];
        let dl_dcov2d: Matrix2<f64> = -a * acc_inv_cov[pi] * a;
        let dl_dmcam: Matrix3<f64> = jac.transpose() * dl_dcov2d * jac;

        // Mean: through the pinhole map and through the Jacobian's own
        // dependence on the camera-frame point.
        let mut dl_dxcam: Vector3<f64> = jac.transpose() * acc_mean2d[pi];
        let dl_djac = (dl_dcov2d + dl_dcov2d.transpose()) * jac * m_cam;
        let (x, y, z) = (x_cam.x, x_cam.y, x_cam.z);
        let z2 = z * z;
        let z3 = z2 * z;
        dl_dxcam.x += dl_djac[(0, 2)] * (-intr.fx / z2);
        dl_dxcam.y += dl_djac[(1, 2)] * (-intr.fy / z2);
        dl_dxcam.z += dl_djac[(0, 0)] * (-intr.fx / z2)
            + dl_djac[(1, 1)] * (-intr.fy / z2)
            + dl_djac[(0, 2)] * (2.0 * intr.fx * x / z3)
            + dl_djac[(1, 2)] * (2.0 * intr.fy * y / z3);
        // Blended depth reads x_cam.z directly.
        dl_dxcam.z += acc_depth[pi];

        let grad = &mut grads[si];
        grad.color = acc_color[pi];
        grad.opacity = acc_opacity[pi];
        grad.mu = w_rot.transpose() * dl_dxcam;

        // Covariance chain: Sigma_world = N N^T with N = R(q) diag(scale).
        let dl_dsigma_w: Matrix3<f64> = w_rot.transpose() * dl_dmcam * w_rot;
        let r = g3.rotation.to_rotation_matrix();
        let r = r.matrix();
        let n_mat = Matrix3::from_columns(&[
            r.column(0) * g3.scale.x,
            r.column(1) * g3.scale.y,
            r.column(2) * g3.scale.z,
        ]);
        let dl_dn = (dl_dsigma_w + dl_dsigma_w.transpose()) * n_mat;
        for k in 0..3 {
            let mut s = 0.0;
            for i in 0..3 {
                s += dl_dn[(i, k)] * r[(i, k)];
            }
            grad.scale[k] = s;
        }
        let mut dl_dr = Matrix3::zeros();
        for i in 0..3 {
            for k in 0..3 {
                dl_dr[(i, k)] = dl_dn[(i, k)] * g3.scale[k];
            }
        }
        grad.rotation = quaternion_grad(&g3.rotation, &dl_dr);

        cam[si] = Some(CamIntermediates {
            x_cam,
            m_cam,
            dl_dxcam,
            dl_dmcam,
        });
    }

    BackwardOutput {
        loss,
        render,
        grads,
        cam,
    }
}

/// Contracts dL/dR with dR/dq for a unit quaternion, then projects through
/// the normalization so the result is a raw-component gradient.
fn quaternion_grad(q: &nalgebra::UnitQuaternion<f64>, dl_dr: &Matrix3<f64>) -> Quaternion<f64> {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    let dr_dw = Matrix3::new(0.0, -z, y, z, 0.0, -x, -y, x, 0.0) * 2.0;
    let dr_dx = Matrix3::new(0.0, y, z, y, -2.0 * x, -w, z, w, -2.0 * x) * 2.0;
    let dr_dy = Matrix3::new(-2.0 * y, x, w, x, 0.0, z, -w, z, -2.0 * y) * 2.0;
    let dr_dz = Matrix3::new(-2.0 * z, -w, x, w, -2.0 * z, y, x, y, 0.0) * 2.0;
    let contract = |m: &Matrix3<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += dl_dr[(i, j)] * m[(i, j)];
            }
        }
        s
    };
    let g = nalgebra::Vector4::new(
        contract(&dr_dw),
        contract(&dr_dx),
        contract(&dr_dy),
        contract(&dr_dz),
    );
    let unit = nalgebra::Vector4::new(w, x, y, z);
    let projected = g - unit * unit.dot(&g);
    Quaternion::new(projected[0], projected[1], projected[2], projected[3])
}

/// Gradients of the loss with respect to every Gaussian's parameters.
pub fn gaussian_gradients(
    scene: &Scene,
    pose: &Pose,
    intr: &CameraIntrinsics,
    frame: &Frame,
    opts: &RenderOptions,
    loss_cfg: &LossConfig,
) -> SceneGrads {
    let out = backward_pass(scene, pose, intr, frame, opts, loss_cfg, None);
    SceneGrads {
        grads: out.grads,
        loss: out.loss,
    }
}

/// Gradient of the loss with respect to a left-multiplied se(3) perturbation
/// of the world-to-camera pose (translation axes first), Gaussians fixed.
pub fn pose_gradient(
    scene: &Scene,
    pose: &Pose,
    intr: &CameraIntrinsics,
    frame: &Frame,
    opts: &RenderOptions,
    loss_cfg: &LossConfig,
) -> (Vector6<f64>, f64) {
    let out = backward_pass(scene, pose, intr, frame, opts, loss_cfg, None);
    (pose_gradient_from_backward(&out), out.loss)
}

pub fn pose_gradient_from_backward(out: &BackwardOutput) -> Vector6<f64> {
    let mut grad = Vector6::zeros();
    let basis = [
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(0.0, 1.0, 0.0),
        Vector3::new(0.0, 0.0, 1.0),
    ];
    for ci in out.cam.iter().flatten() {
        let v_part = ci.dl_dxcam;
        grad[0] += v_part.x;
        grad[1] += v_part.y;
        grad[2] += v_part.z;
        let rot_point = ci.x_cam.cross(&ci.dl_dxcam);
        for k in 0..3 {
            // Rotating the pose also rotates the camera-frame covariance:
            // dM = [e_k]x M - M [e_k]x.
            let e = skew3(&basis[k]);
            let dm = e * ci.m_cam - ci.m_cam * e;
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += ci.dl_dmcam[(i, j)] * dm[(i, j)];
                }
            }
            grad[3 + k] += rot_point[k] + s;
        }
    }
    grad
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRates {
    pub mu: f64,
    pub scale: f64,
    pub rotation: f64,
    pub opacity: f64,
    pub color: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            mu: 1e-3,
            scale: 1e-3,
            rotation: 1e-3,
            opacity: 5e-2,
            color: 2.5e-2,
        }
    }
}

/// Plain gradient-descent step per parameter group. Gaussians whose gradient
/// is exactly zero are left untouched bit-for-bit; updated quaternions are
/// re-normalized, opacity/color clamped, and scale floored.
pub fn update_gaussians(scene: &mut Scene, grads: &[GaussianGrad], lrs: &LearningRates) {
    assert_eq!(scene.gaussians.len(), grads.len());
    for (g, grad) in scene.gaussians.iter_mut().zip(grads) {
        if grad.is_zero() {
            continue;
        }
        g.mu -= grad.mu * lrs.mu;
        g.scale = (g.scale - grad.scale * lrs.scale).map(|s| s.max(crate::types::MIN_SCALE));
        let raw = *g.rotation.quaternion() - grad.rotation * lrs.rotation;
        if raw.norm() > 1e-12 {
            g.rotation = nalgebra::UnitQuaternion::from_quaternion(raw);
        }
        g.opacity = (g.opacity - grad.opacity * lrs.opacity).clamp(0.0, 1.0);
        g.color = (g.color - grad.color * lrs.color).map(|c| c.clamp(0.0, 1.0));
    }
}

//! Brute-force reference renderer: per pixel, walk every projected Gaussian
//! in global (depth, id) order with no tiling and no early termination. Used
//! to validate the tiled pipeline; keep its traversal independent of the
//! table machinery.

use crate::frame::{ColorImage, DepthImage};
use crate::project::{project_gaussians, Gaussian2D};
use crate::render::{alpha_from_q, quadratic_form, SUPPORT_Q_MAX};
use crate::types::{CameraIntrinsics, Pose, Scene};
use nalgebra::{Vector2, Vector3};

pub fn oracle_render(scene: &Scene, pose: &Pose, intr: &CameraIntrinsics) -> (ColorImage, DepthImage) {
    let mut g2ds = project_gaussians(&scene.gaussians, pose, intr);
    g2ds.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.id.cmp(&b.id)));
    oracle_render_projected(&g2ds, intr.width, intr.height)
}

/// `g2ds` must already be in (depth, id) order.
pub fn oracle_render_projected(
    g2ds: &[Gaussian2D],
    width: usize,
    height: usize,
) -> (ColorImage, DepthImage) {
    let mut color = ColorImage::new(width, height);
    let mut depth = DepthImage::new(width, height);
    for py in 0..height {
        for px in 0..width {
            let pixel = Vector2::new(px as f64, py as f64);
            let mut transmittance = 1.0_f64;
            let mut acc_color = Vector3::zeros();
            let mut acc_depth = 0.0_f64;
            for g in g2ds {
                let q = quadratic_form(g, pixel);
                if q > SUPPORT_Q_MAX {
                    continue;
                }
                let alpha = alpha_from_q(g.opacity, q);
                let weight = transmittance * alpha;
                acc_color += g.color * weight;
                acc_depth += g.depth * weight;
                transmittance *= 1.0 - alpha;
            }
            color.set(px, py, acc_color);
            depth.set(px, py, acc_depth);
        }
    }
    (color, depth)
}

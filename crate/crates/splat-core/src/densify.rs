//! Coverage-driven densification: spawn new Gaussians where the render left
//! high transmittance and the observed depth is valid.

use crate::frame::Frame;
use crate::render::RenderAux;
use crate::types::{CameraIntrinsics, Gaussian3D, Pose, Scene};
use nalgebra::UnitQuaternion;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensifyConfig {
    /// A pixel counts as under-covered when its final transmittance exceeds
    /// this.
    pub transmittance_threshold: f64,
    /// Pixel block granularity; at most one spawn per block per call.
    pub block_size: usize,
    /// Isotropic scale of a spawned Gaussian, as a multiple of depth / fx.
    pub scale_factor: f64,
    pub opacity: f64,
}

impl Default for DensifyConfig {
    fn default() -> Self {
        Self {
            transmittance_threshold: 0.5,
            block_size: 4,
            scale_factor: 2.0,
            opacity: 0.5,
        }
    }
}

/// Scans the frame in `block_size` blocks; in each block the most
/// under-covered pixel (ties broken row-major) with valid observed depth
/// spawns one Gaussian at its back-projected point, colored from the frame.
/// Returns the number of Gaussians added.
pub fn densify(
    scene: &mut Scene,
    frame: &Frame,
    pose: &Pose,
    intr: &CameraIntrinsics,
    aux: &RenderAux,
    cfg: &DensifyConfig,
) -> usize {
    assert_eq!(aux.width, intr.width);
    assert_eq!(aux.height, intr.height);
    let cam_to_world = pose.inverse();
    let mut added = 0usize;
    let bs = cfg.block_size;
    for by in (0..intr.height).step_by(bs) {
        for bx in (0..intr.width).step_by(bs) {
            let mut best: Option<(f64, usize, usize)> = None;
            for y in by..(by + bs).min(intr.height) {
                for x in bx..(bx + bs).min(intr.width) {
                    let t = aux.final_t[y * aux.width + x];
                    if t > cfg.transmittance_threshold && frame.depth.is_valid(x, y) {
                        let better = match best {
                            None => true,
                            Some((bt, _, _)) => t > bt,
                        };
                        if better {
                            best = Some((t, x, y));
                        }
                    }
                }
            }
            if let Some((_, x, y)) = best {
                let d = frame.depth.get(x, y);
                let p_cam = intr.backproject(x as f64, y as f64, d);
                let mu = cam_to_world.transform_point(&p_cam);
                let s = cfg.scale_factor * d / intr.fx;
                let id = scene.alloc_id();
                scene.push(Gaussian3D::new(
                    id,
                    mu,
                    nalgebra::Vector3::new(s, s, s),
                    UnitQuaternion::identity(),
                    cfg.opacity,
                    frame.color.get(x, y),
                ));
                added += 1;
            }
        }
    }
    added
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{ColorImage, DepthImage};
    use nalgebra::Vector3;

    fn uniform_frame(w: usize, h: usize, depth: f64) -> Frame {
        let mut d = DepthImage::new(w, h);
        for y in 0..h {
            for x in 0..w {
                d.set(x, y, depth);
            }
        }
        let mut c = ColorImage::new(w, h);
        for p in c.pixels_mut() {
            *p = Vector3::new(0.2, 0.4, 0.6);
        }
        Frame {
            id: 0,
            timestamp: 0.0,
            color: c,
            depth: d,
            gt_pose: None,
        }
    }

    fn blank_aux(w: usize, h: usize, t: f64) -> RenderAux {
        RenderAux {
            width: w,
            height: h,
            final_t: vec![t; w * h],
            term_index: vec![0; w * h],
            evals: vec![Vec::new(); w * h],
        }
    }

    #[test]
    fn covered_frame_spawns_nothing() {
        let intr = CameraIntrinsics::centered(50.0, 50.0, 8, 8);
        let frame = uniform_frame(8, 8, 2.0);
        let aux = blank_aux(8, 8, 0.1);
        let mut scene = Scene::new();
        let added = densify(
            &mut scene,
            &frame,
            &Pose::identity(),
            &intr,
            &aux,
            &DensifyConfig::default(),
        );
        assert_eq!(added, 0);
        assert!(scene.is_empty());
    }

    #[test]
    fn empty_map_spawns_one_per_block() {
        let intr = CameraIntrinsics::centered(50.0, 50.0, 8, 8);
        let frame = uniform_frame(8, 8, 2.0);
        let aux = blank_aux(8, 8, 1.0);
        let mut scene = Scene::new();
        let added = densify(
            &mut scene,
            &frame,
            &Pose::identity(),
            &intr,
            &aux,
            &DensifyConfig::default(),
        );
        assert_eq!(added, 4);
        assert_eq!(scene.len(), 4);
    }

    #[test]
    fn spawned_gaussian_reprojects_to_source_pixel() {
        let intr = CameraIntrinsics::centered(60.0, 60.0, 8, 8);
        let frame = uniform_frame(8, 8, 3.0);
        let aux = blank_aux(8, 8, 1.0);
        let pose = Pose::new(
            UnitQuaternion::from_euler_angles(0.05, -0.1, 0.02),
            Vector3::new(0.2, -0.1, 0.3),
        );
        let mut scene = Scene::new();
        densify(&mut scene, &frame, &pose, &intr, &aux, &DensifyConfig::default());
        // Block scan picks the first qualifying pixel of each block (all T equal).
        let expected = [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0), (4.0, 4.0)];
        for (g, (ex, ey)) in scene.gaussians.iter().zip(expected) {
            let p_cam = pose.transform_point(&g.mu);
            let (u, v) = intr.project(&p_cam);
            assert!((u - ex).abs() < 0.5, "u {} vs {}", u, ex);
            assert!((v - ey).abs() < 0.5, "v {} vs {}", v, ey);
        }
    }
}

//! Tiled front-to-back alpha blending.
//!
//! Per pixel, each table entry is considered in depth order. An entry is
//! evaluated only where its squared Mahalanobis distance is at most
//! [`SUPPORT_Q_MAX`] (the same 3-sigma support the intersection test bounds),
//! which makes the tiled traversal agree exactly with an untiled one: outside
//! its support a Gaussian is skipped no matter which tiles it was binned to.
//! Evaluated alphas are blended regardless of magnitude; thresholding tiny
//! contributions is the mapping layer's job, not the renderer's.

use crate::frame::{ColorImage, DepthImage};
use crate::project::{build_gaussian_tables, project_gaussians, Gaussian2D, GaussianTable, TileGrid};
use crate::types::{CameraIntrinsics, GaussianId, Pose, Scene};
use nalgebra::{Matrix2, Vector2, Vector3};
use std::collections::BTreeSet;

/// Rendering for a pixel terminates once transmittance drops below this.
pub const EARLY_TERMINATION_T: f64 = 1e-4;

/// Upper clamp on per-Gaussian alpha; keeps transmittance strictly positive.
pub const ALPHA_CLAMP: f64 = 0.99;

/// Squared Mahalanobis support radius (3 sigma).
pub const SUPPORT_Q_MAX: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub tile_size: usize,
    /// When false, every pixel traverses its full table.
    pub early_termination: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            tile_size: 16,
            early_termination: true,
        }
    }
}

/// One evaluated (Gaussian, pixel) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaEval {
    pub id: GaussianId,
    pub alpha: f64,
}

/// Per-pixel blend byproducts consumed by mapping (contribution recording)
/// and by the accelerator model (evaluation traces).
#[derive(Debug, Clone, PartialEq)]
pub struct RenderAux {
    pub width: usize,
    pub height: usize,
    /// Final transmittance per pixel.
    pub final_t: Vec<f64>,
    /// Number of table entries considered before the pixel's traversal
    /// stopped; at most the table length.
    pub term_index: Vec<usize>,
    /// Evaluated alphas per pixel, in blend order.
    pub evals: Vec<Vec<AlphaEval>>,
}

impl RenderAux {
    fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            final_t: vec![1.0; width * height],
            term_index: vec![0; width * height],
            evals: vec![Vec::new(); width * height],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub color: ColorImage,
    /// Alpha-blended camera-frame depth (un-normalized Eq.-style weights);
    /// zero where nothing was blended.
    pub depth: DepthImage,
    pub aux: RenderAux,
}

/// Squared Mahalanobis distance of `pixel` under `g`.
pub fn quadratic_form(g: &Gaussian2D, pixel: Vector2<f64>) -> f64 {
    let d = pixel - g.mean2d;
    let inv = invert2(&g.cov2d);
    (d.transpose() * inv * d)[(0, 0)]
}

/// General 2x2 inverse; the projected covariance was regularized at
/// projection time so the determinant is safely positive.
pub fn invert2(m: &Matrix2<f64>) -> Matrix2<f64> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det
}

#[inline]
pub fn alpha_from_q(opacity: f64, q: f64) -> f64 {
    (opacity * (-0.5 * q).exp()).min(ALPHA_CLAMP)
}

/// Occlusion factor of `g` at `pixel`: opacity times the Gaussian falloff,
/// clamped to [`ALPHA_CLAMP`]. With opacity 1 this is the bare falloff.
pub fn compute_alpha(g: &Gaussian2D, pixel: Vector2<f64>) -> f64 {
    alpha_from_q(g.opacity, quadratic_form(g, pixel))
}

/// Blends one tile of pixels. `lookup` resolves table ids to projected
/// Gaussians. Outputs are written into the full-frame buffers.
pub fn render_tile<'a, F: Fn(GaussianId) -> &'a Gaussian2D>(
    table: &GaussianTable,
    lookup: F,
    grid: &TileGrid,
    opts: &RenderOptions,
    color: &mut ColorImage,
    depth: &mut DepthImage,
    aux: &mut RenderAux,
) {
    let (x0, y0, x1, y1) = grid.tile_rect(table.tile_id);
    for py in y0..y1 {
        for px in x0..x1 {
            let pixel = Vector2::new(px as f64, py as f64);
            let mut transmittance = 1.0_f64;
            let mut acc_color = Vector3::zeros();
            let mut acc_depth = 0.0_f64;
            let mut considered = 0usize;
            let idx = py * aux.width + px;
            for entry in &table.entries {
                if opts.early_termination && transmittance < EARLY_TERMINATION_T {
                    break;
                }
                considered += 1;
                let g = lookup(entry.id);
                let q = quadratic_form(g, pixel);
                if q > SUPPORT_Q_MAX {
                    continue;
                }
                let alpha = alpha_from_q(g.opacity, q);
                aux.evals[idx].push(AlphaEval {
                    id: entry.id,
                    alpha,
                });
                let weight = transmittance * alpha;
                acc_color += g.color * weight;
                acc_depth += g.depth * weight;
                transmittance *= 1.0 - alpha;
            }
            aux.final_t[idx] = transmittance;
            aux.term_index[idx] = considered;
            color.set(px, py, acc_color);
            depth.set(px, py, acc_depth);
        }
    }
}

/// Full pipeline: project, bin, sort, blend every tile.
pub fn render_frame(
    scene: &Scene,
    pose: &Pose,
    intr: &CameraIntrinsics,
    opts: &RenderOptions,
) -> RenderOutput {
    render_frame_filtered(scene, pose, intr, opts, None)
}

/// As [`render_frame`], but Gaussians in `skip` are removed from the tables
/// before any pixel work happens.
pub fn render_frame_filtered(
    scene: &Scene,
    pose: &Pose,
    intr: &CameraIntrinsics,
    opts: &RenderOptions,
    skip: Option<&BTreeSet<GaussianId>>,
) -> RenderOutput {
    let mut g2ds = project_gaussians(&scene.gaussians, pose, intr);
    if let Some(skip) = skip {
        g2ds.retain(|g| !skip.contains(&g.id));
    }
    render_projected(&g2ds, intr, opts)
}

/// Renders already-projected Gaussians; the entry point shared by the forward
/// and backward passes.
pub fn render_projected(
    g2ds: &[Gaussian2D],
    intr: &CameraIntrinsics,
    opts: &RenderOptions,
) -> RenderOutput {
    let grid = TileGrid::new(intr.width, intr.height, opts.tile_size);
    let tables = build_gaussian_tables(g2ds, &grid);
    let mut by_id: Vec<(GaussianId, usize)> = g2ds.iter().enumerate().map(|(i, g)| (g.id, i)).collect();
    by_id.sort_unstable_by_key(|(id, _)| *id);
    let lookup = |id: GaussianId| -> &Gaussian2D {
        let pos = by_id
            .binary_search_by_key(&id, |(gid, _)| *gid)
            .expect("table entry refers to a projected gaussian");
        &g2ds[by_id[pos].1]
    };
    let mut color = ColorImage::new(intr.width, intr.height);
    let mut depth = DepthImage::new(intr.width, intr.height);
    let mut aux = RenderAux::new(intr.width, intr.height);
    for table in &tables {
        render_tile(table, lookup, &grid, opts, &mut color, &mut depth, &mut aux);
    }
    RenderOutput { color, depth, aux }
}

//! Photometric + depth objective.

use crate::frame::{ColorImage, DepthImage, Frame};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Weight of the depth term.
    pub lambda_depth: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { lambda_depth: 0.5 }
    }
}

/// L1 color loss (summed over channels, averaged over all pixels) plus
/// `lambda_depth` times the L1 depth loss averaged over pixels with valid
/// observed depth. The rendered depth is the alpha-blended camera depth.
pub fn photometric_depth_loss(
    rendered_color: &ColorImage,
    rendered_depth: &DepthImage,
    observed: &Frame,
    cfg: &LossConfig,
) -> f64 {
    assert_eq!(rendered_color.width(), observed.width());
    assert_eq!(rendered_color.height(), observed.height());
    let n_pixels = (observed.width() * observed.height()) as f64;
    let mut color_term = 0.0;
    for (r, o) in rendered_color.pixels().iter().zip(observed.color.pixels()) {
        let d = r - o;
        color_term += d.x.abs() + d.y.abs() + d.z.abs();
    }
    color_term /= n_pixels;

    let mut depth_term = 0.0;
    let mut n_valid = 0usize;
    for (r, o) in rendered_depth.samples().iter().zip(observed.depth.samples()) {
        if o.is_finite() && *o > 0.0 {
            depth_term += (r - o).abs();
            n_valid += 1;
        }
    }
    if n_valid > 0 {
        depth_term /= n_valid as f64;
    }
    color_term + cfg.lambda_depth * depth_term
}

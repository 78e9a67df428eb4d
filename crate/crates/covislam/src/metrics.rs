//! Trajectory and image-quality metrics.

use nalgebra::{Matrix3, Vector3};
use splat_core::ColorImage;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("trajectory length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("trajectories need at least 2 poses, got {0}")]
    TooShort(usize),
}

/// Closed-form least-squares rigid alignment (rotation + translation, no
/// scale) of `est` onto `gt`, then the RMSE of the translational residuals.
pub fn ate_rmse(est: &[Vector3<f64>], gt: &[Vector3<f64>]) -> Result<f64, MetricsError> {
    if est.len() != gt.len() {
        return Err(MetricsError::LengthMismatch(est.len(), gt.len()));
    }
    if est.len() < 2 {
        return Err(MetricsError::TooShort(est.len()));
    }
    let n = est.len() as f64;
    let centroid_est: Vector3<f64> = est.iter().sum::<Vector3<f64>>() / n;
    let centroid_gt: Vector3<f64> = gt.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::<f64>::zeros();
    for (e, g) in est.iter().zip(gt) {
        h += (e - centroid_est) * (g - centroid_gt).transpose();
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
    let t = centroid_gt - r * centroid_est;
    let mse: f64 = est
        .iter()
        .zip(gt)
        .map(|(e, g)| (r * e + t - g).norm_squared())
        .sum::<f64>()
        / n;
    Ok(mse.sqrt())
}

/// Peak signal-to-noise ratio in dB over all channels of two images with
/// values in [0, 1]. Identical images give `f64::INFINITY`.
pub fn psnr(a: &ColorImage, b: &ColorImage) -> f64 {
    assert_eq!(a.width(), b.width());
    assert_eq!(a.height(), b.height());
    let mut mse = 0.0;
    for (pa, pb) in a.pixels().iter().zip(b.pixels()) {
        let d = pa - pb;
        mse += d.x * d.x + d.y * d.y + d.z * d.z;
    }
    mse /= (3 * a.width() * a.height()) as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

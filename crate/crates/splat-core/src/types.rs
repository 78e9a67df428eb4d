//! Scene and camera primitives.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3, Vector6};

pub type GaussianId = u64;

/// One anisotropic Gaussian primitive, the unit of all map state.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian3D {
    pub id: GaussianId,
    /// Center position in world units.
    pub mu: Vector3<f64>,
    /// Per-axis standard deviations in world units, strictly positive.
    pub scale: Vector3<f64>,
    /// Orientation of the principal axes.
    pub rotation: UnitQuaternion<f64>,
    /// Opacity in [0, 1].
    pub opacity: f64,
    /// RGB color, each channel in [0, 1].
    pub color: Vector3<f64>,
}

impl Gaussian3D {
    /// Builds a Gaussian, clamping opacity/color into [0, 1] and flooring the
    /// scale at a small positive value so the covariance stays invertible.
    pub fn new(
        id: GaussianId,
        mu: Vector3<f64>,
        scale: Vector3<f64>,
        rotation: UnitQuaternion<f64>,
        opacity: f64,
        color: Vector3<f64>,
    ) -> Self {
        Self {
            id,
            mu,
            scale: scale.map(|s| s.max(MIN_SCALE)),
            rotation,
            opacity: opacity.clamp(0.0, 1.0),
            color: color.map(|c| c.clamp(0.0, 1.0)),
        }
    }

    /// World-frame 3x3 covariance, `R S S^T R^T`.
    pub fn covariance(&self) -> Matrix3<f64> {
        let r = self.rotation.to_rotation_matrix();
        let rs = Matrix3::from_columns(&[
            r.matrix().column(0) * self.scale.x,
            r.matrix().column(1) * self.scale.y,
            r.matrix().column(2) * self.scale.z,
        ]);
        rs * rs.transpose()
    }

    pub fn validate(&self) -> Result<(), String> {
        if (self.rotation.as_ref().norm() - 1.0).abs() > 1e-6 {
            return Err(format!("gaussian {}: quaternion not unit", self.id));
        }
        if self.scale.min() <= 0.0 {
            return Err(format!("gaussian {}: non-positive scale", self.id));
        }
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(format!("gaussian {}: opacity out of range", self.id));
        }
        if self.color.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(format!("gaussian {}: color out of range", self.id));
        }
        Ok(())
    }
}

/// Scale floor applied on construction and after updates.
pub const MIN_SCALE: f64 = 1e-6;

/// Rigid world-to-camera transform: `x_cam = R x_world + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        *self.rotation.to_rotation_matrix().matrix()
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Pose {
        let rot_inv = self.rotation.inverse();
        Pose {
            rotation: rot_inv,
            translation: -(rot_inv * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Camera center in world coordinates, `-R^T t`.
    pub fn camera_center(&self) -> Vector3<f64> {
        -(self.rotation.inverse() * self.translation)
    }

    /// Exponential map of a twist `(v, w)`: translation part first, rotation
    /// part last. Used for left-multiplied pose perturbations.
    pub fn exp_se3(xi: &Vector6<f64>) -> Pose {
        let v = Vector3::new(xi[0], xi[1], xi[2]);
        let w = Vector3::new(xi[3], xi[4], xi[5]);
        let theta_sq = w.norm_squared();
        let rotation = UnitQuaternion::from_scaled_axis(w);
        let skew = skew3(&w);
        let skew_sq = skew * skew;
        // V = I + a*[w]x + b*[w]x^2 with series fallback near theta = 0.
        let (a, b) = if theta_sq < 1e-12 {
            (0.5 - theta_sq / 24.0, 1.0 / 6.0 - theta_sq / 120.0)
        } else {
            let theta = theta_sq.sqrt();
            (
                (1.0 - theta.cos()) / theta_sq,
                (theta - theta.sin()) / (theta_sq * theta),
            )
        };
        let v_mat = Matrix3::identity() + skew * a + skew_sq * b;
        Pose {
            rotation,
            translation: v_mat * v,
        }
    }

    /// Left-multiplied perturbation: `exp(xi) ∘ self`.
    pub fn perturb_left(&self, xi: &Vector6<f64>) -> Pose {
        Pose::exp_se3(xi).compose(self)
    }

    pub fn validate(&self) -> Result<(), String> {
        let r = self.rotation_matrix();
        let err = (r * r.transpose() - Matrix3::identity()).norm();
        if err > 1e-6 || (r.determinant() - 1.0).abs() > 1e-6 {
            return Err("pose rotation not orthonormal".to_string());
        }
        Ok(())
    }
}

pub fn skew3(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Pinhole camera model. Pixel centers sit at integer coordinates; pixel
/// (0, 0) is the top-left, x runs right and y runs down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Self {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        debug_assert!(intr.validate().is_ok());
        intr
    }

    /// Centered principal point with a given focal length.
    pub fn centered(fx: f64, fy: f64, width: usize, height: usize) -> Self {
        Self::new(
            fx,
            fy,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err("non-positive focal length".to_string());
        }
        if !(0.0..self.width as f64).contains(&self.cx)
            || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err("principal point outside image".to_string());
        }
        Ok(())
    }

    /// Projects a camera-frame point (z > 0) to pixel coordinates.
    pub fn project(&self, p_cam: &Vector3<f64>) -> (f64, f64) {
        (
            self.fx * p_cam.x / p_cam.z + self.cx,
            self.fy * p_cam.y / p_cam.z + self.cy,
        )
    }

    /// Back-projects pixel (u, v) at camera-frame depth `d` (> 0).
    pub fn backproject(&self, u: f64, v: f64, d: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx * d, (v - self.cy) / self.fy * d, d)
    }
}

/// A set of Gaussians plus a monotone id allocator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scene {
    pub gaussians: Vec<Gaussian3D>,
    next_id: GaussianId,
}

impl Scene {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_gaussians(gaussians: Vec<Gaussian3D>) -> Self {
        let next_id = gaussians.iter().map(|g| g.id + 1).max().unwrap_or(0);
        Self { gaussians, next_id }
    }

    pub fn alloc_id(&mut self) -> GaussianId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub fn push(&mut self, g: Gaussian3D) {
        self.next_id = self.next_id.max(g.id + 1);
        self.gaussians.push(g);
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }
}

pub fn quaternion_raw(q: &UnitQuaternion<f64>) -> Quaternion<f64> {
    *q.quaternion()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pose_compose_inverse_roundtrip() {
        let p = Pose::new(
            UnitQuaternion::from_euler_angles(0.1, -0.2, 0.3),
            Vector3::new(1.0, -2.0, 0.5),
        );
        let q = p.compose(&p.inverse());
        assert_relative_eq!(q.rotation.angle(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(q.translation.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn exp_se3_matches_pure_translation_and_small_rotation() {
        let xi = Vector6::new(0.1, 0.2, -0.3, 0.0, 0.0, 0.0);
        let p = Pose::exp_se3(&xi);
        assert_relative_eq!(p.translation, Vector3::new(0.1, 0.2, -0.3), epsilon = 1e-12);
        assert_relative_eq!(p.rotation.angle(), 0.0, epsilon = 1e-12);

        let xi = Vector6::new(0.0, 0.0, 0.0, 1e-9, 0.0, 0.0);
        let p = Pose::exp_se3(&xi);
        assert_relative_eq!(p.rotation.angle(), 1e-9, epsilon = 1e-15);
    }

    #[test]
    fn covariance_is_symmetric_positive() {
        let g = Gaussian3D::new(
            0,
            Vector3::zeros(),
            Vector3::new(0.5, 1.0, 2.0),
            UnitQuaternion::from_euler_angles(0.3, 0.2, 0.1),
            0.8,
            Vector3::new(1.0, 0.0, 0.0),
        );
        let cov = g.covariance();
        assert_relative_eq!(cov, cov.transpose(), epsilon = 1e-12);
        assert!(cov.determinant() > 0.0);
    }

    #[test]
    fn constructor_clamps_fields() {
        let g = Gaussian3D::new(
            1,
            Vector3::zeros(),
            Vector3::new(-1.0, 0.1, 0.1),
            UnitQuaternion::identity(),
            1.5,
            Vector3::new(-0.5, 0.5, 2.0),
        );
        assert_eq!(g.scale.x, MIN_SCALE);
        assert_eq!(g.opacity, 1.0);
        assert_eq!(g.color, Vector3::new(0.0, 0.5, 1.0));
        assert!(g.validate().is_ok());
    }
}

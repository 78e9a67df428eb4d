//! Core math for anisotropic 3D Gaussian scenes trained from posed RGB-D
//! frames: projection to screen space, tile binning with depth-sorted
//! Gaussian tables, front-to-back alpha blending with early termination,
//! analytic gradients for Gaussian parameters and camera pose, plain
//! gradient-descent updates, and coverage-driven densification.
//!
//! A brute-force reference renderer lives in [`oracle`]; it shares only the
//! per-Gaussian blend arithmetic with the tiled path so that tiling, table
//! construction, and early termination are validated against an independent
//! traversal.

pub mod densify;
pub mod frame;
pub mod grad;
pub mod loss;
pub mod oracle;
pub mod project;
pub mod render;
pub mod types;

pub use densify::{densify, DensifyConfig};
pub use frame::{ColorImage, DepthImage, Frame};
pub use grad::{
    backward_pass, gaussian_gradients, pose_gradient, pose_gradient_from_backward,
    update_gaussians, BackwardOutput, GaussianGrad, LearningRates, SceneGrads,
};
pub use loss::{photometric_depth_loss, LossConfig};
pub use project::{
    build_gaussian_tables, intersect_tiles, project_gaussians, Gaussian2D, GaussianTable,
    TableEntry, TileGrid, COV2D_DILATION, NEAR_PLANE,
};
pub use render::{
    compute_alpha, render_frame, render_frame_filtered, render_tile, AlphaEval, RenderAux,
    RenderOptions, RenderOutput, ALPHA_CLAMP, EARLY_TERMINATION_T, SUPPORT_Q_MAX,
};
pub use types::{CameraIntrinsics, Gaussian3D, GaussianId, Pose, Scene};

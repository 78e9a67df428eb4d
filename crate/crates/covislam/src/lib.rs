//! Experiment harness for the covisibility-gated splatting SLAM pipeline:
//! synthetic scene generation, TUM-RGBD ingestion, trajectory/quality
//! metrics, two-mode experiment runs, accelerator-model replay, and
//! sensitivity sweeps.

pub mod config_io;
pub mod experiment;
pub mod metrics;
pub mod sweep;
pub mod synth;
pub mod tum;

pub use config_io::load_config;
pub use experiment::{
    emit_report, load_frames, per_frame_csv, run_experiment, ExperimentConfig, ExperimentOutput,
    FrameRow, ModeReport, RunReport,
};
pub use metrics::{ate_rmse, psnr};
pub use sweep::{run_sweep, sweep_csv, SweepParam, SweepRow};
pub use synth::{
    generate_synthetic, ground_truth_scene, look_at, pose_with_center, render_sequence,
    SceneSpec, SyntheticScene, TrajectoryKind,
};
pub use tum::{export_tum_rgbd, load_tum_rgbd, read_trajectory, write_trajectory, TumLoad};

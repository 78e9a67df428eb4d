//! Cycle-approximate performance model of the splatting accelerator.
//!
//! The model never recomputes values: it replays evaluation traces captured
//! from the functional pipeline and only accounts for time, utilization, and
//! DRAM traffic. Every simulated path must produce outputs bit-identical to
//! the functional modules, and every run is deterministic for a given input
//! and configuration.

pub mod config;
pub mod error;
pub mod gpe;
pub mod pipeline;
pub mod stats;
pub mod systolic;
pub mod tables;
pub mod trace;

pub use config::{DramConfig, EnergyWeights, HardwareConfig};
pub use error::SimError;
pub use gpe::{
    simulate_frame_render, simulate_frame_render_on, simulate_tile_render, FrameRenderStats,
    GroupSimResult,
};
pub use pipeline::{simulate_pipeline, FrameTask, PipelineResult};
pub use stats::SimStats;
pub use systolic::{coarse_estimator_cycles, fc_detection_cycles};
pub use tables::{simulate_logging, simulate_skipping, LoggingResult, TileContribution};
pub use trace::{FrameTrace, GaussWork, PixelTrace, TileTrace};

//! The two-mode experiment: a non-adaptive baseline (fixed-iteration
//! tracking, full mapping every frame, serialized engines, no workload
//! scheduler) and the adaptive pipeline (covisibility-gated refinement,
//! selective mapping, logging/skipping tables, GPE scheduler, overlapped
//! engines) run over the same input, with per-frame rows and aggregate
//! metrics collected into one report.

use crate::metrics::{ate_rmse, psnr};
use crate::synth::{generate_synthetic, SceneSpec};
use crate::tum::{load_tum_rgbd, write_trajectory};
use anyhow::{bail, Context, Result};
use arch_sim::{
    coarse_estimator_cycles, fc_detection_cycles, simulate_frame_render_on, simulate_logging,
    simulate_pipeline, simulate_skipping, FrameTask, FrameTrace, HardwareConfig, SimStats,
    TileContribution,
};
use codec_me::MotionConfig;
use mapping::{false_positive_rate, scaled_thresh_n, FrameClass, Mapper, MappingConfig,
    MappingContext};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use splat_core::{
    render_frame, CameraIntrinsics, DensifyConfig, Frame, LearningRates, LossConfig, Pose,
    RenderAux, RenderOptions, Scene,
};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use tracking::{Tracker, TrackingConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub seed: u64,
    /// Tracking iterations per frame in baseline mode.
    pub n_t_baseline: u32,
    /// Cap on ingested frames; 0 means all.
    pub max_frames: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 7,
            n_t_baseline: 40,
            max_frames: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSection {
    /// When set, frames come from this TUM-RGBD directory instead of the
    /// synthetic generator.
    pub tum_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackingSection {
    pub thresh_t: f64,
    pub iter_t: u32,
    pub pose_lr: f64,
}

impl Default for TrackingSection {
    fn default() -> Self {
        let d = TrackingConfig::default();
        Self {
            thresh_t: d.thresh_t,
            iter_t: d.iter_t,
            pose_lr: d.pose_lr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MappingSection {
    pub thresh_m: f64,
    pub thresh_alpha: f64,
    /// Absent means the resolution-scaled default.
    pub thresh_n: Option<u32>,
    pub n_m: u32,
    pub keyframe_window: usize,
}

impl Default for MappingSection {
    fn default() -> Self {
        let d = MappingConfig::default();
        Self {
            thresh_m: d.thresh_m,
            thresh_alpha: d.thresh_alpha,
            thresh_n: None,
            n_m: d.n_m,
            keyframe_window: d.keyframe_window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderSection {
    pub tile_size: usize,
    pub lambda_depth: f64,
    pub lr_mu: f64,
    pub lr_scale: f64,
    pub lr_rotation: f64,
    pub lr_opacity: f64,
    pub lr_color: f64,
    pub densify_transmittance: f64,
    pub densify_block: usize,
    pub densify_scale_factor: f64,
    pub densify_opacity: f64,
}

impl Default for RenderSection {
    fn default() -> Self {
        let lrs = LearningRates::default();
        let d = DensifyConfig::default();
        Self {
            tile_size: RenderOptions::default().tile_size,
            lambda_depth: LossConfig::default().lambda_depth,
            lr_mu: lrs.mu,
            lr_scale: lrs.scale,
            lr_rotation: lrs.rotation,
            lr_opacity: lrs.opacity,
            lr_color: lrs.color,
            densify_transmittance: d.transmittance_threshold,
            densify_block: d.block_size,
            densify_scale_factor: d.scale_factor,
            densify_opacity: d.opacity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodecSection {
    pub block_size: usize,
    pub search_radius: i32,
}

impl Default for CodecSection {
    fn default() -> Self {
        let d = MotionConfig::default();
        Self {
            block_size: d.block_size,
            search_radius: d.search_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub scene: SceneSpec,
    pub dataset: DatasetSection,
    pub tracking: TrackingSection,
    pub mapping: MappingSection,
    pub render: RenderSection,
    pub codec: CodecSection,
    pub hardware: HardwareConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            run: RunSection::default(),
            scene: SceneSpec::default(),
            dataset: DatasetSection::default(),
            tracking: TrackingSection::default(),
            mapping: MappingSection::default(),
            render: RenderSection::default(),
            codec: CodecSection::default(),
            hardware: HardwareConfig::edge(),
        }
    }
}

impl ExperimentConfig {
    pub fn motion_config(&self) -> MotionConfig {
        MotionConfig {
            block_size: self.codec.block_size,
            search_radius: self.codec.search_radius,
        }
    }

    pub fn render_options(&self) -> RenderOptions {
        RenderOptions {
            tile_size: self.render.tile_size,
            early_termination: true,
        }
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            lambda_depth: self.render.lambda_depth,
        }
    }

    pub fn learning_rates(&self) -> LearningRates {
        LearningRates {
            mu: self.render.lr_mu,
            scale: self.render.lr_scale,
            rotation: self.render.lr_rotation,
            opacity: self.render.lr_opacity,
            color: self.render.lr_color,
        }
    }

    pub fn densify_config(&self) -> DensifyConfig {
        DensifyConfig {
            transmittance_threshold: self.render.densify_transmittance,
            block_size: self.render.densify_block,
            scale_factor: self.render.densify_scale_factor,
            opacity: self.render.densify_opacity,
        }
    }

    pub fn mapping_config(&self, width: usize, height: usize) -> MappingConfig {
        MappingConfig {
            thresh_m: self.mapping.thresh_m,
            thresh_alpha: self.mapping.thresh_alpha,
            thresh_n: self
                .mapping
                .thresh_n
                .unwrap_or_else(|| scaled_thresh_n(width, height)),
            n_m: self.mapping.n_m,
            keyframe_window: self.mapping.keyframe_window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRow {
    pub frame: u64,
    /// Covisibility with the previous frame (0 for the first frame).
    pub fc_prev: f64,
    pub level: u8,
    pub refined: bool,
    pub class: String,
    /// Covisibility with the governing key frame.
    pub fc_key: Option<f64>,
    pub skip_size: usize,
    /// Skip-prediction false-positive rate; only meaningful on selective
    /// frames.
    pub fp_rate: Option<f64>,
    /// Final mapping-iteration loss on this frame.
    pub loss: f64,
    /// Rendering quality of this frame under the final map; absent when the
    /// render is exact.
    pub psnr_db: Option<f64>,
    pub track_cycles: u64,
    pub map_cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub label: String,
    pub frames: Vec<FrameRow>,
    pub refined_fraction: f64,
    pub key_fraction: f64,
    /// Mean FP rate over selective frames (0 when none).
    pub mean_fp_rate: f64,
    pub ate_rmse: Option<f64>,
    pub mean_psnr_db: Option<f64>,
    /// Makespan charged to this mode: serialized for the baseline,
    /// pipelined for the adaptive mode.
    pub cycles: u64,
    pub pipelined_cycles: u64,
    pub serialized_cycles: u64,
    pub gaussians_final: usize,
    pub dram_read_bytes: u64,
    pub dram_write_bytes: u64,
    pub energy_proxy: f64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub baseline: ModeReport,
    pub adaptive: ModeReport,
    /// baseline cycles / adaptive cycles.
    pub speedup: f64,
    /// adaptive PSNR minus baseline PSNR, when both are finite.
    pub psnr_gap_db: Option<f64>,
}

/// Full in-memory result, including what the report files are derived from.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: RunReport,
    pub stamps: Vec<f64>,
    pub gt_trajectory: Option<Vec<Pose>>,
    pub baseline_trajectory: Vec<Pose>,
    pub adaptive_trajectory: Vec<Pose>,
    /// Final-frame mapping trace of the adaptive run (replayable via the
    /// `simulate` subcommand).
    pub sample_trace: Option<FrameTrace>,
}

struct ModeRun {
    report: ModeReport,
    trajectory: Vec<Pose>,
    sample_trace: Option<FrameTrace>,
}

fn frame_trace_from_aux(aux: &RenderAux, scene: &Scene) -> FrameTrace {
    let colors: BTreeMap<u64, [f64; 3]> = scene
        .gaussians
        .iter()
        .map(|g| (g.id, [g.color.x, g.color.y, g.color.z]))
        .collect();
    let evals: Vec<Vec<(u64, f64)>> = aux
        .evals
        .iter()
        .map(|pe| pe.iter().map(|e| (e.id, e.alpha)).collect())
        .collect();
    FrameTrace::from_evals(aux.width, aux.height, &evals, &colors, 4)
}

/// Per-render-tile contribution deltas for the logging-table model.
fn tile_contributions(aux: &RenderAux, tile_size: usize, thresh_alpha: f64) -> Vec<TileContribution> {
    let mut tiles = Vec::new();
    let mut tile_id = 0;
    for by in (0..aux.height).step_by(tile_size) {
        for bx in (0..aux.width).step_by(tile_size) {
            let mut deltas: BTreeMap<u64, u32> = BTreeMap::new();
            for y in by..(by + tile_size).min(aux.height) {
                for x in bx..(bx + tile_size).min(aux.width) {
                    for e in &aux.evals[y * aux.width + x] {
                        let d = deltas.entry(e.id).or_insert(0);
                        if e.alpha < thresh_alpha {
                            *d += 1;
                        }
                    }
                }
            }
            if !deltas.is_empty() {
                tiles.push(TileContribution {
                    tile_id,
                    deltas: deltas.into_iter().collect(),
                });
            }
            tile_id += 1;
        }
    }
    tiles
}

/// MAC-count model of the motion/depth coarse estimator: back-projection and
/// accumulation per block plus a fixed solve cost.
fn coarse_estimator_macs(num_blocks: u64) -> u64 {
    50 * num_blocks + 2000
}

fn run_mode(
    frames: &[Frame],
    intr: &CameraIntrinsics,
    cfg: &ExperimentConfig,
    adaptive: bool,
) -> Result<ModeRun> {
    let hw = &cfg.hardware;
    hw.validate().map_err(anyhow::Error::msg)?;
    let me_cfg = cfg.motion_config();
    let render_opts = cfg.render_options();
    let loss_cfg = cfg.loss_config();
    let map_cfg = {
        let mut m = cfg.mapping_config(intr.width, intr.height);
        if !adaptive {
            // fc never exceeds 1, so this gate keeps every frame a key frame.
            m.thresh_m = 1.0;
        }
        m
    };
    let track_cfg = TrackingConfig {
        thresh_t: cfg.tracking.thresh_t,
        iter_t: if adaptive {
            cfg.tracking.iter_t
        } else {
            cfg.run.n_t_baseline
        },
        pose_lr: cfg.tracking.pose_lr,
        force_refinement: !adaptive,
    };
    let ctx = MappingContext {
        intr: *intr,
        render_opts,
        loss_cfg,
        lrs: cfg.learning_rates(),
        densify_cfg: cfg.densify_config(),
    };
    let scheduler_on = adaptive;

    let initial_pose = frames
        .first()
        .and_then(|f| f.gt_pose)
        .unwrap_or_else(Pose::identity);
    let mut tracker = Tracker::new(initial_pose, me_cfg);
    let mut mapper = Mapper::new(map_cfg, me_cfg, cfg.run.seed);
    let mut scene = Scene::new();

    let blocks = (intr.width.div_ceil(me_cfg.block_size)
        * intr.height.div_ceil(me_cfg.block_size)) as u64;
    let mut rows: Vec<FrameRow> = Vec::with_capacity(frames.len());
    let mut schedule: Vec<FrameTask> = Vec::with_capacity(frames.len());
    let mut trajectory: Vec<Pose> = Vec::with_capacity(frames.len());
    let mut totals = SimStats::default();
    let mut sample_trace = None;

    for frame in frames {
        // Tracking.
        let outcome = tracker.track(frame, &scene, intr, &track_cfg, &render_opts, &loss_cfg);
        let (mut fc_cycles, mut coarse_cycles) = (0u64, 0u64);
        if adaptive {
            let (fc, fc_stats) = fc_detection_cycles(blocks, 2, hw);
            fc_cycles = fc;
            totals.add_counters(&fc_stats);
            let macs = coarse_estimator_macs(blocks);
            coarse_cycles = coarse_estimator_cycles(macs, hw);
            totals.macs += macs;
        }
        let mut refine_cycles = 0u64;
        if outcome.used_refinement && track_cfg.iter_t > 0 {
            let probe = render_frame(&scene, &outcome.coarse_pose, intr, &render_opts);
            let trace = frame_trace_from_aux(&probe.aux, &scene);
            let render =
                simulate_frame_render_on(&trace, hw, scheduler_on, hw.light_groups())?;
            let grad_cycles =
                (trace.total_evals() * hw.c_grad as u64).div_ceil(hw.light_gpes());
            let iters = track_cfg.iter_t as u64;
            refine_cycles = iters * (render.cycles + grad_cycles);
            let mut iter_stats = render.stats;
            iter_stats.grad_ops = trace.total_evals();
            totals.add_counters(&iter_stats.scaled(iters));
        }
        trajectory.push(outcome.pose);

        // Mapping.
        let prior_keyframes = mapper.keyframes().len();
        let map_outcome = mapper.map_frame(frame, &outcome.pose, &mut scene, &ctx);
        let frames_per_iter = (1 + prior_keyframes.min(map_cfg.keyframe_window)) as u64;
        let map_trace = frame_trace_from_aux(&map_outcome.report.final_aux, &scene);
        let render = simulate_frame_render_on(&map_trace, hw, scheduler_on, hw.num_gpe_groups)?;
        let grad_cycles = (map_trace.total_evals() * hw.c_grad as u64).div_ceil(hw.total_gpes());
        let reps = map_cfg.n_m as u64 * frames_per_iter;
        let mut mapping_cycles = reps * (render.cycles + grad_cycles);
        let mut iter_stats = render.stats;
        iter_stats.grad_ops = map_trace.total_evals();
        totals.add_counters(&iter_stats.scaled(reps));

        let mut fp_rate = None;
        if adaptive {
            match map_outcome.class {
                FrameClass::Key => {
                    let tiles = tile_contributions(
                        &map_outcome.report.final_aux,
                        render_opts.tile_size,
                        map_cfg.thresh_alpha,
                    );
                    let logging = simulate_logging(&tiles, hw);
                    mapping_cycles += logging.stats.cycles;
                    totals.add_counters(&logging.stats);
                }
                FrameClass::NonKey => {
                    if let Some(record) = mapper.record() {
                        let (_, skip_stats) = simulate_skipping(record, map_cfg.thresh_n, hw);
                        mapping_cycles += skip_stats.cycles;
                        totals.add_counters(&skip_stats);
                    }
                    fp_rate = Some(false_positive_rate(
                        &scene,
                        frame,
                        &outcome.pose,
                        mapper.skip_set(),
                        &map_cfg,
                        &ctx,
                    ));
                }
            }
        }
        if frame.id == frames.last().map(|f| f.id).unwrap_or_default() {
            sample_trace = Some(map_trace);
        }

        schedule.push(FrameTask {
            fc_cycles,
            coarse_cycles,
            refine_cycles,
            mapping_cycles,
        });
        rows.push(FrameRow {
            frame: frame.id,
            fc_prev: outcome.covis.fc,
            level: outcome.covis.level,
            refined: outcome.used_refinement,
            class: match map_outcome.class {
                FrameClass::Key => "key".to_string(),
                FrameClass::NonKey => "non-key".to_string(),
            },
            fc_key: map_outcome.covis_with_key.map(|c| c.fc),
            skip_size: map_outcome.skip_size,
            fp_rate,
            loss: map_outcome.report.final_loss,
            psnr_db: None, // filled after the run against the final map
            track_cycles: fc_cycles + coarse_cycles + refine_cycles,
            map_cycles: mapping_cycles,
        });
    }

    // Rendering quality of every frame under the final map.
    let mut finite_psnrs = Vec::new();
    for (row, (frame, pose)) in rows.iter_mut().zip(frames.iter().zip(&trajectory)) {
        let out = render_frame(&scene, pose, intr, &render_opts);
        let db = psnr(&out.color, &frame.color);
        if db.is_finite() {
            finite_psnrs.push(db);
            row.psnr_db = Some(db);
        }
    }
    let mean_psnr_db = if finite_psnrs.is_empty() {
        None
    } else {
        Some(finite_psnrs.iter().sum::<f64>() / finite_psnrs.len() as f64)
    };

    let gt: Option<Vec<Vector3<f64>>> = frames
        .iter()
        .map(|f| f.gt_pose.map(|p| p.camera_center()))
        .collect();
    let ate = match &gt {
        Some(gt_centers) if gt_centers.len() >= 2 => {
            let est: Vec<Vector3<f64>> = trajectory.iter().map(|p| p.camera_center()).collect();
            ate_rmse(&est, gt_centers).ok()
        }
        _ => None,
    };

    let pipeline = simulate_pipeline(&schedule)?;
    let cycles = if adaptive {
        pipeline.pipelined_makespan
    } else {
        pipeline.serialized_makespan
    };

    let n = rows.len() as f64;
    let refined_fraction = rows.iter().filter(|r| r.refined).count() as f64 / n;
    let key_fraction = rows.iter().filter(|r| r.class == "key").count() as f64 / n;
    let fp_rows: Vec<f64> = rows.iter().filter_map(|r| r.fp_rate).collect();
    let mean_fp_rate = if fp_rows.is_empty() {
        0.0
    } else {
        fp_rows.iter().sum::<f64>() / fp_rows.len() as f64
    };

    Ok(ModeRun {
        report: ModeReport {
            label: if adaptive { "adaptive" } else { "baseline" }.to_string(),
            frames: rows,
            refined_fraction,
            key_fraction,
            mean_fp_rate,
            ate_rmse: ate,
            mean_psnr_db,
            cycles,
            pipelined_cycles: pipeline.pipelined_makespan,
            serialized_cycles: pipeline.serialized_makespan,
            gaussians_final: scene.len(),
            dram_read_bytes: totals.dram_read_bytes,
            dram_write_bytes: totals.dram_write_bytes,
            energy_proxy: totals.energy_proxy(&hw.energy),
            utilization: totals.utilization(),
        },
        trajectory,
        sample_trace,
    })
}

/// Loads or generates the input sequence.
pub fn load_frames(cfg: &ExperimentConfig) -> Result<(Vec<Frame>, CameraIntrinsics)> {
    let (mut frames, intr) = match &cfg.dataset.tum_dir {
        Some(dir) => {
            let load = load_tum_rgbd(Path::new(dir)).context("loading TUM-RGBD directory")?;
            if load.frames.is_empty() {
                bail!("no associated frames in {dir}");
            }
            let w = load.frames[0].width();
            let h = load.frames[0].height();
            // TUM fr1-style intrinsics scaled to the actual resolution.
            let intr = CameraIntrinsics::centered(
                517.3 * w as f64 / 640.0,
                516.5 * h as f64 / 480.0,
                w,
                h,
            );
            (load.frames, intr)
        }
        None => {
            let scene = generate_synthetic(&cfg.scene);
            (scene.frames, cfg.scene.intrinsics())
        }
    };
    if cfg.run.max_frames > 0 {
        frames.truncate(cfg.run.max_frames);
    }
    if frames.is_empty() {
        bail!("empty frame sequence");
    }
    Ok((frames, intr))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (frames, intr) = load_frames(cfg)?;
    let baseline = run_mode(&frames, &intr, cfg, false)?;
    let adaptive = run_mode(&frames, &intr, cfg, true)?;
    let speedup = baseline.report.cycles as f64 / adaptive.report.cycles.max(1) as f64;
    let psnr_gap_db = match (adaptive.report.mean_psnr_db, baseline.report.mean_psnr_db) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    };
    let stamps: Vec<f64> = frames.iter().map(|f| f.timestamp).collect();
    let gt_trajectory: Option<Vec<Pose>> = frames.iter().map(|f| f.gt_pose).collect();
    Ok(ExperimentOutput {
        report: RunReport {
            config: cfg.clone(),
            baseline: baseline.report,
            adaptive: adaptive.report,
            speedup,
            psnr_gap_db,
        },
        stamps,
        gt_trajectory,
        baseline_trajectory: baseline.trajectory,
        adaptive_trajectory: adaptive.trajectory,
        sample_trace: adaptive.sample_trace,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x}"),
        Some(_) => "inf".to_string(),
        None => String::new(),
    }
}

pub fn per_frame_csv(report: &RunReport) -> String {
    let mut csv = String::from(
        "mode,frame,fc_prev,level,refined,class,fc_key,skip_size,fp_rate,loss,psnr_db,track_cycles,map_cycles\n",
    );
    for mode in [&report.baseline, &report.adaptive] {
        for r in &mode.frames {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                mode.label,
                r.frame,
                r.fc_prev,
                r.level,
                r.refined,
                r.class,
                fmt_opt(r.fc_key),
                r.skip_size,
                fmt_opt(r.fp_rate),
                r.loss,
                fmt_opt(r.psnr_db),
                r.track_cycles,
                r.map_cycles
            );
        }
    }
    csv
}

/// Writes `report.json`, `per_frame.csv`, and the trajectory files. Contents
/// are deterministic functions of the output.
pub fn emit_report(output: &ExperimentOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(&output.report)?;
    std::fs::write(dir.join("report.json"), json)?;
    std::fs::write(dir.join("per_frame.csv"), per_frame_csv(&output.report))?;
    crate::tum::write_trajectory(
        &dir.join("traj_est_baseline.txt"),
        &output.stamps,
        &output.baseline_trajectory,
    )?;
    crate::tum::write_trajectory(
        &dir.join("traj_est_adaptive.txt"),
        &output.stamps,
        &output.adaptive_trajectory,
    )?;
    if let Some(gt) = &output.gt_trajectory {
        crate::tum::write_trajectory(&dir.join("traj_gt.txt"), &output.stamps, gt)?;
    }
    if let Some(trace) = &output.sample_trace {
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf)?;
        std::fs::write(dir.join("trace_last_frame.jsonl"), buf)?;
    }
    Ok(())
}

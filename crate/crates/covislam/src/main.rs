use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use covislam::{
    config_io::load_config, emit_report, export_tum_rgbd, generate_synthetic, load_tum_rgbd,
    metrics, read_trajectory, run_experiment, run_sweep, sweep_csv, SceneSpec, SweepParam,
    TrajectoryKind,
};
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "covislam",
    about = "Covisibility-gated Gaussian-splatting SLAM testbed with a cycle-approximate accelerator model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// TOML config file; defaults apply for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hardware preset: edge | server.
    #[arg(long)]
    preset: Option<String>,
    /// Override any config key, e.g. --set tracking.iter_t=10 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<covislam::ExperimentConfig> {
        load_config(self.config.as_deref(), self.preset.as_deref(), &self.sets)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic RGB-D sequence in TUM-RGBD layout.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 96)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 300)]
        gaussians: usize,
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value = "pan")]
        trajectory: TrajectoryKind,
        #[arg(long, default_value_t = 1.0)]
        pan_px: f64,
        #[arg(long, default_value_t = 1.0)]
        orbit_deg: f64,
        #[arg(long, default_value_t = 0.01)]
        walk_step: f64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Dump per-frame covisibility reports of a sequence as CSV.
    Covis {
        /// TUM-RGBD directory.
        #[arg(long)]
        input: PathBuf,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        block_size: usize,
        #[arg(long, default_value_t = 8)]
        search_radius: i32,
    },
    /// Run the full two-mode experiment and emit the report files.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Replay a JSONL evaluation trace through the accelerator model.
    Simulate {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = "on")]
        scheduler: String,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Metrics on saved artifacts.
    Eval {
        #[command(subcommand)]
        what: EvalCommand,
    },
    /// Hyperparameter sensitivity sweeps.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// iter-t | thresh-m | thresh-n | all
        #[arg(long, default_value = "all")]
        param: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// ATE RMSE between two trajectory files (TUM format).
    Ate {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
    /// PSNR between two PNG images.
    Psnr {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

fn load_png_color(path: &PathBuf) -> Result<splat_core::ColorImage> {
    let img = image::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut out = splat_core::ColorImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let p = img.get_pixel(x as u32, y as u32);
            out.set(
                x,
                y,
                nalgebra::Vector3::new(
                    p[0] as f64 / 255.0,
                    p[1] as f64 / 255.0,
                    p[2] as f64 / 255.0,
                ),
            );
        }
    }
    Ok(out)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth {
            out,
            width,
            height,
            gaussians,
            frames,
            trajectory,
            pan_px,
            orbit_deg,
            walk_step,
            noise,
            seed,
        } => {
            let spec = SceneSpec {
                width,
                height,
                gaussians,
                frames,
                trajectory,
                pan_px_per_frame: pan_px,
                orbit_deg_per_frame: orbit_deg,
                walk_step,
                noise,
                seed,
                ..Default::default()
            };
            let scene = generate_synthetic(&spec);
            export_tum_rgbd(&out, &scene.frames)?;
            println!(
                "wrote {} frames ({}x{}) to {}",
                scene.frames.len(),
                width,
                height,
                out.display()
            );
        }
        Command::Covis {
            input,
            out,
            block_size,
            search_radius,
        } => {
            let load = load_tum_rgbd(&input)?;
            if load.skipped > 0 {
                eprintln!("warning: skipped {} unassociated rows", load.skipped);
            }
            let me = codec_me::MotionConfig {
                block_size,
                search_radius,
            };
            let mut csv = String::from("frame,timestamp,total_sad,fc,level\n");
            for pair in load.frames.windows(2) {
                let r = codec_me::frame_covisibility(&pair[1].color, &pair[0].color, &me);
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    pair[1].id, pair[1].timestamp, r.total_sad, r.fc, r.level
                );
            }
            match out {
                Some(path) => std::fs::write(&path, csv)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
        }
        Command::Run { config, out } => {
            let cfg = config.load()?;
            let output = run_experiment(&cfg)?;
            emit_report(&output, &out)?;
            let r = &output.report;
            println!(
                "frames: {}  speedup: {:.2}x  baseline cycles: {}  adaptive cycles: {}",
                r.baseline.frames.len(),
                r.speedup,
                r.baseline.cycles,
                r.adaptive.cycles
            );
            println!(
                "psnr (dB): baseline {:?} adaptive {:?}  refined: {:.0}%  key: {:.0}%  fp: {:.1}%",
                r.baseline.mean_psnr_db,
                r.adaptive.mean_psnr_db,
                100.0 * r.adaptive.refined_fraction,
                100.0 * r.adaptive.key_fraction,
                100.0 * r.adaptive.mean_fp_rate
            );
            println!("report written to {}", out.display());
        }
        Command::Simulate {
            trace,
            scheduler,
            config,
        } => {
            let cfg = config.load()?;
            let scheduler_on = match scheduler.as_str() {
                "on" => true,
                "off" => false,
                other => bail!("--scheduler expects on|off, got '{other}'"),
            };
            let file = std::fs::File::open(&trace)
                .with_context(|| format!("opening {}", trace.display()))?;
            let frame_trace = arch_sim::FrameTrace::read_jsonl(std::io::BufReader::new(file))?;
            let result =
                arch_sim::simulate_frame_render(&frame_trace, &cfg.hardware, scheduler_on)?;
            let mut stats = result.stats;
            stats.cycles = result.cycles;
            let json = serde_json::json!({
                "preset": cfg.hardware.name,
                "scheduler": scheduler,
                "tiles": frame_trace.tiles.len(),
                "stats": stats,
                "utilization": stats.utilization(),
                "energy_proxy": stats.energy_proxy(&cfg.hardware.energy),
            });
            println!("{}", serde_json::to_string_pretty(&json)?);
        }
        Command::Eval { what } => match what {
            EvalCommand::Ate { est, gt } => {
                let est_traj = read_trajectory(&est)?;
                let gt_traj = read_trajectory(&gt)?;
                if est_traj.len() != gt_traj.len() {
                    bail!(
                        "trajectory length mismatch: {} vs {}",
                        est_traj.len(),
                        gt_traj.len()
                    );
                }
                let est_pts: Vec<_> = est_traj.iter().map(|(_, p)| p.camera_center()).collect();
                let gt_pts: Vec<_> = gt_traj.iter().map(|(_, p)| p.camera_center()).collect();
                let rmse = metrics::ate_rmse(&est_pts, &gt_pts)?;
                println!("ate_rmse: {rmse} (trajectory units)");
            }
            EvalCommand::Psnr { a, b } => {
                let ia = load_png_color(&a)?;
                let ib = load_png_color(&b)?;
                let v = metrics::psnr(&ia, &ib);
                if v.is_finite() {
                    println!("psnr_db: {v}");
                } else {
                    println!("psnr_db: inf");
                }
            }
        },
        Command::Sweep { config, param, out } => {
            let cfg = config.load()?;
            let params: Vec<SweepParam> = match param.as_str() {
                "all" => vec![SweepParam::IterT, SweepParam::ThreshM, SweepParam::ThreshN],
                other => vec![other.parse().map_err(anyhow::Error::msg)?],
            };
            std::fs::create_dir_all(&out)?;
            for p in params {
                let rows = run_sweep(&cfg, p)?;
                let path = out.join(format!("sweep_{}.csv", p.name()));
                std::fs::write(&path, sweep_csv(&rows))?;
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

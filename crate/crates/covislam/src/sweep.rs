//! Threshold-sensitivity sweeps: rerun the experiment while varying one
//! hyperparameter over its canonical grid and tabulate quality against
//! savings.

use crate::experiment::{run_experiment, ExperimentConfig};
use anyhow::Result;
use mapping::scaled_thresh_n;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    IterT,
    ThreshM,
    ThreshN,
}

impl std::str::FromStr for SweepParam {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "iter-t" | "iter_t" => Ok(Self::IterT),
            "thresh-m" | "thresh_m" => Ok(Self::ThreshM),
            "thresh-n" | "thresh_n" => Ok(Self::ThreshN),
            other => Err(format!("unknown sweep parameter '{other}'")),
        }
    }
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            Self::IterT => "iter_t",
            Self::ThreshM => "thresh_m",
            Self::ThreshN => "thresh_n",
        }
    }

    /// Canonical grid, in the parameter's conservative direction last.
    pub fn values(&self, cfg: &ExperimentConfig) -> Vec<f64> {
        match self {
            Self::IterT => vec![5.0, 10.0, 20.0, 40.0],
            Self::ThreshM => vec![0.3, 0.5, 0.7, 0.9],
            Self::ThreshN => {
                let base = cfg
                    .mapping
                    .thresh_n
                    .unwrap_or_else(|| scaled_thresh_n(cfg.scene.width, cfg.scene.height))
                    as f64;
                vec![
                    (base * 0.25).round(),
                    (base * 0.5).round(),
                    base.round(),
                    (base * 2.0).round(),
                ]
            }
        }
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig, value: f64) {
        match self {
            Self::IterT => cfg.tracking.iter_t = value as u32,
            Self::ThreshM => cfg.mapping.thresh_m = value,
            Self::ThreshN => cfg.mapping.thresh_n = Some(value as u32),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub psnr_db: Option<f64>,
    pub ate_rmse: Option<f64>,
    pub adaptive_cycles: u64,
    pub baseline_cycles: u64,
    pub speedup: f64,
    pub mean_fp_rate: f64,
    pub refined_fraction: f64,
    pub key_fraction: f64,
}

pub fn run_sweep(base: &ExperimentConfig, param: SweepParam) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for value in param.values(base) {
        let mut cfg = base.clone();
        param.apply(&mut cfg, value);
        let output = run_experiment(&cfg)?;
        let r = &output.report;
        rows.push(SweepRow {
            param: param.name().to_string(),
            value,
            psnr_db: r.adaptive.mean_psnr_db,
            ate_rmse: r.adaptive.ate_rmse,
            adaptive_cycles: r.adaptive.cycles,
            baseline_cycles: r.baseline.cycles,
            speedup: r.speedup,
            mean_fp_rate: r.adaptive.mean_fp_rate,
            refined_fraction: r.adaptive.refined_fraction,
            key_fraction: r.adaptive.key_fraction,
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut csv = String::from(
        "param,value,psnr_db,ate_rmse,adaptive_cycles,baseline_cycles,speedup,mean_fp_rate,refined_fraction,key_fraction\n",
    );
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            r.param,
            r.value,
            r.psnr_db.map(|v| v.to_string()).unwrap_or_default(),
            r.ate_rmse.map(|v| v.to_string()).unwrap_or_default(),
            r.adaptive_cycles,
            r.baseline_cycles,
            r.speedup,
            r.mean_fp_rate,
            r.refined_fraction,
            r.key_fraction
        );
    }
    csv
}

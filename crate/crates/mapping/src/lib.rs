//! Contribution-aware mapping.
//!
//! Frames are keyed against the last key frame by covisibility: high-fc
//! frames are non-key and run *selective* mapping, which removes Gaussians
//! predicted non-contributory from the tables before rendering; everything
//! else is a key frame and runs *full* mapping, which records per-Gaussian
//! non-contributory pixel counts from the final training iteration and
//! rebuilds the skip prediction for the frames that follow.
//!
//! A Gaussian is non-contributory at a pixel when its evaluated alpha falls
//! below `thresh_alpha`; it is skipped outright when that happens at more
//! than `thresh_n` pixels of the governing key frame.

use codec_me::{frame_covisibility, CovisibilityReport, MotionConfig};
use rand::seq::index::sample as sample_indices;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use splat_core::{
    backward_pass, densify, render_frame_filtered, update_gaussians, CameraIntrinsics,
    DensifyConfig, Frame, GaussianId, LearningRates, LossConfig, Pose, RenderAux, RenderOptions,
    Scene,
};
use std::collections::{BTreeMap, BTreeSet};

pub type SkipSet = BTreeSet<GaussianId>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingConfig {
    /// Key/non-key gate: non-key iff fc(cur, last key) > thresh_m.
    pub thresh_m: f64,
    /// Alpha below this counts as non-contributory for the pixel.
    pub thresh_alpha: f64,
    /// Pixel-count threshold; counts above it mark the Gaussian skippable.
    pub thresh_n: u32,
    /// Training iterations per mapped frame.
    pub n_m: u32,
    /// Past key frames sampled per iteration.
    pub keyframe_window: usize,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            thresh_m: 0.50,
            thresh_alpha: 1.0 / 255.0,
            thresh_n: 450,
            n_m: 30,
            keyframe_window: 2,
        }
    }
}

impl MappingConfig {
    /// `thresh_n` was tuned at 640x480; scale it with the pixel count so the
    /// skip aggressiveness is resolution-proportional.
    pub fn desk_default(width: usize, height: usize) -> Self {
        Self {
            thresh_n: scaled_thresh_n(width, height),
            ..Default::default()
        }
    }
}

pub fn scaled_thresh_n(width: usize, height: usize) -> u32 {
    (450.0 * (width * height) as f64 / (640.0 * 480.0)).round() as u32
}

/// Per-Gaussian non-contributory pixel counts captured on a key frame. Only
/// Gaussians actually evaluated during that render appear (possibly with a
/// zero count).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContributionRecord {
    pub key_frame_id: u64,
    pub counts: BTreeMap<GaussianId, u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameClass {
    Key,
    NonKey,
}

/// Non-key iff covisibility with the last key frame exceeds `thresh_m`.
pub fn classify_frame(
    cur: &Frame,
    last_key: &Frame,
    me_cfg: &MotionConfig,
    cfg: &MappingConfig,
) -> (FrameClass, CovisibilityReport) {
    let covis = frame_covisibility(&cur.color, &last_key.color, me_cfg);
    let class = if covis.fc > cfg.thresh_m {
        FrameClass::NonKey
    } else {
        FrameClass::Key
    };
    (class, covis)
}

/// Counts, per evaluated Gaussian, the pixels where its alpha stayed below
/// `thresh_alpha`.
pub fn record_contributions(
    aux: &RenderAux,
    key_frame_id: u64,
    cfg: &MappingConfig,
) -> ContributionRecord {
    let mut counts: BTreeMap<GaussianId, u32> = BTreeMap::new();
    for pixel_evals in &aux.evals {
        for eval in pixel_evals {
            let entry = counts.entry(eval.id).or_insert(0);
            if eval.alpha < cfg.thresh_alpha {
                *entry += 1;
            }
        }
    }
    ContributionRecord {
        key_frame_id,
        counts,
    }
}

/// Pure threshold filter: ids whose count exceeds `thresh_n`.
pub fn build_skip_set(record: &ContributionRecord, cfg: &MappingConfig) -> SkipSet {
    record
        .counts
        .iter()
        .filter(|(_, c)| **c > cfg.thresh_n)
        .map(|(id, _)| *id)
        .collect()
}

/// Splat-side knobs shared by every mapping step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingContext {
    pub intr: CameraIntrinsics,
    pub render_opts: RenderOptions,
    pub loss_cfg: LossConfig,
    pub lrs: LearningRates,
    pub densify_cfg: DensifyConfig,
}

impl MappingContext {
    pub fn new(intr: CameraIntrinsics) -> Self {
        Self {
            intr,
            render_opts: RenderOptions::default(),
            loss_cfg: LossConfig::default(),
            lrs: LearningRates::default(),
            densify_cfg: DensifyConfig::default(),
        }
    }
}

/// Byproducts of one mapped frame.
#[derive(Debug, Clone)]
pub struct MapStepReport {
    pub densified: usize,
    /// Current-frame loss observed in the final training iteration.
    pub final_loss: f64,
    /// Final training iteration's current-frame render byproducts.
    pub final_aux: RenderAux,
}

fn sample_keyframes<'a>(
    keyframes: &'a [(Frame, Pose)],
    window: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<&'a (Frame, Pose)> {
    if keyframes.len() <= window {
        keyframes.iter().collect()
    } else {
        let mut idx = sample_indices(rng, keyframes.len(), window).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| &keyframes[i]).collect()
    }
}

/// Densify, then `n_m` training iterations over the current frame plus a
/// sample of past key frames. `skip` removes Gaussians from every render's
/// tables; their parameters stay untouched bit-for-bit.
fn mapping_step(
    frame: &Frame,
    pose: &Pose,
    scene: &mut Scene,
    skip: Option<&SkipSet>,
    keyframes: &[(Frame, Pose)],
    cfg: &MappingConfig,
    ctx: &MappingContext,
    rng: &mut ChaCha8Rng,
) -> MapStepReport {
    assert!(cfg.n_m >= 1);
    let coverage = render_frame_filtered(scene, pose, &ctx.intr, &ctx.render_opts, skip);
    let densified = densify(
        scene,
        frame,
        pose,
        &ctx.intr,
        &coverage.aux,
        &ctx.densify_cfg,
    );

    let mut final_loss = 0.0;
    let mut final_aux = coverage.aux;
    for it in 0..cfg.n_m {
        let sampled = sample_keyframes(keyframes, cfg.keyframe_window, rng);
        let bw = backward_pass(
            scene,
            pose,
            &ctx.intr,
            frame,
            &ctx.render_opts,
            &ctx.loss_cfg,
            skip,
        );
        let mut grads = bw.grads;
        for (kf, kp) in sampled {
            let kbw = backward_pass(
                scene,
                kp,
                &ctx.intr,
                kf,
                &ctx.render_opts,
                &ctx.loss_cfg,
                skip,
            );
            for (g, k) in grads.iter_mut().zip(&kbw.grads) {
                g.add_assign(k);
            }
        }
        if it == cfg.n_m - 1 {
            final_loss = bw.loss;
            final_aux = bw.render.aux;
        }
        update_gaussians(scene, &grads, &ctx.lrs);
    }
    MapStepReport {
        densified,
        final_loss,
        final_aux,
    }
}

/// Baseline mapping for a key frame; records contribution information from
/// the final iteration's render.
pub fn full_mapping(
    frame: &Frame,
    pose: &Pose,
    scene: &mut Scene,
    keyframes: &[(Frame, Pose)],
    cfg: &MappingConfig,
    ctx: &MappingContext,
    rng: &mut ChaCha8Rng,
) -> (ContributionRecord, MapStepReport) {
    let report = mapping_step(frame, pose, scene, None, keyframes, cfg, ctx, rng);
    let record = record_contributions(&report.final_aux, frame.id, cfg);
    (record, report)
}

/// Mapping for a non-key frame: identical to full mapping except skipped
/// Gaussians never enter the Gaussian tables and nothing is recorded.
pub fn selective_mapping(
    frame: &Frame,
    pose: &Pose,
    scene: &mut Scene,
    skip: &SkipSet,
    keyframes: &[(Frame, Pose)],
    cfg: &MappingConfig,
    ctx: &MappingContext,
    rng: &mut ChaCha8Rng,
) -> MapStepReport {
    mapping_step(frame, pose, scene, Some(skip), keyframes, cfg, ctx, rng)
}

/// Fraction of skipped Gaussians that were actually contributory: a skipped
/// Gaussian counts as a false positive when a full render of the frame gives
/// it at least one pixel with alpha >= `thresh_alpha`.
pub fn false_positive_rate(
    scene: &Scene,
    frame: &Frame,
    pose: &Pose,
    skip: &SkipSet,
    cfg: &MappingConfig,
    ctx: &MappingContext,
) -> f64 {
    assert_eq!(frame.width(), ctx.intr.width);
    assert_eq!(frame.height(), ctx.intr.height);
    if skip.is_empty() {
        return 0.0;
    }
    let out = render_frame_filtered(scene, pose, &ctx.intr, &ctx.render_opts, None);
    let mut contributory: BTreeSet<GaussianId> = BTreeSet::new();
    for pixel_evals in &out.aux.evals {
        for eval in pixel_evals {
            if eval.alpha >= cfg.thresh_alpha {
                contributory.insert(eval.id);
            }
        }
    }
    let fp = skip.iter().filter(|id| contributory.contains(id)).count();
    fp as f64 / skip.len() as f64
}

/// Outcome of dispatching one frame.
#[derive(Debug, Clone)]
pub struct MapOutcome {
    pub class: FrameClass,
    /// Covisibility with the last key frame; `None` for the first frame.
    pub covis_with_key: Option<CovisibilityReport>,
    /// Size of the skip set in force during this frame (after a key frame's
    /// rebuild, the new one).
    pub skip_size: usize,
    pub report: MapStepReport,
}

/// Mapping state machine: owns the key-frame history, the contribution
/// record, and the skip prediction.
pub struct Mapper {
    pub cfg: MappingConfig,
    me_cfg: MotionConfig,
    rng: ChaCha8Rng,
    last_key: Option<(Frame, Pose)>,
    keyframes: Vec<(Frame, Pose)>,
    record: Option<ContributionRecord>,
    skip: SkipSet,
}

impl Mapper {
    pub fn new(cfg: MappingConfig, me_cfg: MotionConfig, seed: u64) -> Self {
        Self {
            cfg,
            me_cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            last_key: None,
            keyframes: Vec::new(),
            record: None,
            skip: SkipSet::new(),
        }
    }

    pub fn record(&self) -> Option<&ContributionRecord> {
        self.record.as_ref()
    }

    pub fn skip_set(&self) -> &SkipSet {
        &self.skip
    }

    pub fn keyframes(&self) -> &[(Frame, Pose)] {
        &self.keyframes
    }

    /// Classifies the frame against the last key frame, then dispatches to
    /// full or selective mapping. Key frames replace the stored record and
    /// skip set and join the key-frame history.
    pub fn map_frame(
        &mut self,
        frame: &Frame,
        pose: &Pose,
        scene: &mut Scene,
        ctx: &MappingContext,
    ) -> MapOutcome {
        let (class, covis) = match &self.last_key {
            None => (FrameClass::Key, None),
            Some((kf, _)) => {
                let (class, covis) = classify_frame(frame, kf, &self.me_cfg, &self.cfg);
                (class, Some(covis))
            }
        };
        match class {
            FrameClass::Key => {
                let (record, report) = full_mapping(
                    frame,
                    pose,
                    scene,
                    &self.keyframes,
                    &self.cfg,
                    ctx,
                    &mut self.rng,
                );
                self.skip = build_skip_set(&record, &self.cfg);
                self.record = Some(record);
                self.last_key = Some((frame.clone(), *pose));
                self.keyframes.push((frame.clone(), *pose));
                MapOutcome {
                    class,
                    covis_with_key: covis,
                    skip_size: self.skip.len(),
                    report,
                }
            }
            FrameClass::NonKey => {
                let report = selective_mapping(
                    frame,
                    pose,
                    scene,
                    &self.skip,
                    &self.keyframes,
                    &self.cfg,
                    ctx,
                    &mut self.rng,
                );
                MapOutcome {
                    class,
                    covis_with_key: covis,
                    skip_size: self.skip.len(),
                    report,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use splat_core::AlphaEval;

    fn aux_from(evals: Vec<Vec<AlphaEval>>) -> RenderAux {
        let n = evals.len();
        RenderAux {
            width: n,
            height: 1,
            final_t: vec![1.0; n],
            term_index: vec![0; n],
            evals,
        }
    }

    #[test]
    fn record_counts_subthreshold_pixels() {
        let cfg = MappingConfig::default();
        let lo = 0.5 / 255.0;
        let hi = 10.0 / 255.0;
        // Gaussian 2 and 3 fall below the threshold at three pixels each;
        // Gaussian 1 never does.
        let aux = aux_from(vec![
            vec![
                AlphaEval { id: 1, alpha: hi },
                AlphaEval { id: 2, alpha: lo },
                AlphaEval { id: 3, alpha: lo },
            ],
            vec![
                AlphaEval { id: 1, alpha: hi },
                AlphaEval { id: 2, alpha: lo },
                AlphaEval { id: 3, alpha: lo },
            ],
            vec![
                AlphaEval { id: 2, alpha: lo },
                AlphaEval { id: 3, alpha: lo },
            ],
        ]);
        let record = record_contributions(&aux, 7, &cfg);
        assert_eq!(record.key_frame_id, 7);
        assert_eq!(record.counts[&1], 0);
        assert_eq!(record.counts[&2], 3);
        assert_eq!(record.counts[&3], 3);
        // Partition: every evaluated (gaussian, pixel) pair is attributed.
        let evaluated: usize = aux.evals.iter().map(|e| e.len()).sum();
        assert_eq!(record.counts.len(), 3);
        assert_eq!(evaluated, 8);
    }

    #[test]
    fn skip_set_thresholding() {
        let mut counts = BTreeMap::new();
        counts.insert(1u64, 0u32);
        counts.insert(2, 3);
        counts.insert(3, 3);
        let record = ContributionRecord {
            key_frame_id: 0,
            counts,
        };
        let mut cfg = MappingConfig {
            thresh_n: 2,
            ..Default::default()
        };
        let skip = build_skip_set(&record, &cfg);
        assert_eq!(skip.into_iter().collect::<Vec<_>>(), vec![2, 3]);

        cfg.thresh_n = u32::MAX;
        assert!(build_skip_set(&record, &cfg).is_empty());

        // Monotone: growing thresh_n never adds members.
        let mut last = usize::MAX;
        for t in 0..5 {
            cfg.thresh_n = t;
            let size = build_skip_set(&record, &cfg).len();
            assert!(size <= last);
            last = size;
        }
    }
}

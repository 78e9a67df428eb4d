//! Cycle-stepped model of one group of GPEs rendering one 4x4 pixel tile,
//! with the optional workload-balancing scheduler.
//!
//! Each pixel's Gaussians execute two stages: alpha computation (`c_alpha`
//! cycles) followed by blend accumulation (`c_blend`). Blends are strictly
//! sequential per pixel; alpha computations are independent, so with the
//! scheduler on, a GPE that finished its own pixel assists the busiest
//! remaining GPE by precomputing upcoming alphas into that target's alpha
//! buffer. The target consumes a buffered alpha on a tag hit and pays only
//! the blend cycle.
//!
//! Assist claims are gated by the buffer window (`claimed - blended <
//! capacity`), which is how the buffer-full stall manifests here: an
//! assistant with nothing claimable idles instead of overrunning the
//! buffer. Claims advance strictly in depth order per target, so buffered
//! alphas are consumed in the target pixel's blend order and at most once.
//!
//! Blended colors are replayed functionally from the trace in blend order;
//! scheduling decisions can never change them.

use crate::config::HardwareConfig;
use crate::error::SimError;
use crate::stats::SimStats;
use crate::trace::{FrameTrace, TileTrace};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Action {
    OwnAlpha { idx: usize, rem: u32 },
    Blend { idx: usize, rem: u32 },
    AssistAlpha { target: usize, idx: usize, rem: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SlotState {
    Unclaimed,
    InFlight,
    Ready,
    Consumed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSimResult {
    pub cycles: u64,
    pub busy: Vec<u64>,
    pub idle: Vec<u64>,
    pub assist: Vec<u64>,
    /// Blended RGB per pixel, replayed in blend order.
    pub colors: Vec<[f64; 3]>,
    pub alpha_ops: u64,
    pub blend_ops: u64,
    pub alpha_buffer_hits: u64,
}

impl GroupSimResult {
    pub fn stats(&self) -> SimStats {
        SimStats {
            cycles: self.cycles,
            gpe_busy: self.busy.iter().sum(),
            gpe_idle: self.idle.iter().sum(),
            gpe_assist: self.assist.iter().sum(),
            alpha_ops: self.alpha_ops,
            blend_ops: self.blend_ops,
            alpha_buffer_hits: self.alpha_buffer_hits,
            ..Default::default()
        }
    }
}

/// Functional replay of the blend recurrence, independent of any timing.
fn replay_colors(trace: &TileTrace) -> Vec<[f64; 3]> {
    trace
        .pixels
        .iter()
        .map(|p| {
            let mut transmittance = 1.0_f64;
            let mut c = [0.0_f64; 3];
            for work in &p.evals {
                let weight = transmittance * work.alpha;
                c[0] += work.color[0] * weight;
                c[1] += work.color[1] * weight;
                c[2] += work.color[2] * weight;
                transmittance *= 1.0 - work.alpha;
            }
            c
        })
        .collect()
}

/// Steps one GPE group through a tile trace cycle by cycle.
pub fn simulate_tile_render(
    trace: &TileTrace,
    hw: &HardwareConfig,
    scheduler_on: bool,
) -> Result<GroupSimResult, SimError> {
    let n = hw.gpes_per_group;
    if trace.pixels.len() > n {
        return Err(SimError::GroupOverflow {
            pixels: trace.pixels.len(),
            group_size: n,
        });
    }
    let queue_len: Vec<usize> = (0..n)
        .map(|g| trace.pixels.get(g).map_or(0, |p| p.evals.len()))
        .collect();
    let mut blended = vec![0usize; n];
    let mut claimed = vec![0usize; n];
    let mut slots: Vec<Vec<SlotState>> = queue_len
        .iter()
        .map(|len| vec![SlotState::Unclaimed; *len])
        .collect();
    let mut ready_count = vec![0usize; n];
    let mut action: Vec<Option<Action>> = vec![None; n];

    let mut busy = vec![0u64; n];
    let mut idle = vec![0u64; n];
    let mut assist = vec![0u64; n];
    let mut cycles = 0u64;
    let mut buffer_hits = 0u64;

    let done =
        |blended: &[usize], action: &[Option<Action>]| -> bool {
            blended
                .iter()
                .zip(&queue_len)
                .all(|(b, l)| b >= l)
                && action.iter().all(|a| a.is_none())
        };

    while !done(&blended, &action) {
        // Dispatch phase, in GPE index order.
        for g in 0..n {
            if action[g].is_some() {
                continue;
            }
            if blended[g] < queue_len[g] {
                let idx = blended[g];
                match slots[g][idx] {
                    SlotState::Ready => {
                        slots[g][idx] = SlotState::Consumed;
                        ready_count[g] -= 1;
                        buffer_hits += 1;
                        action[g] = Some(Action::Blend {
                            idx,
                            rem: hw.c_blend,
                        });
                    }
                    SlotState::Unclaimed => {
                        debug_assert_eq!(claimed[g], idx);
                        claimed[g] = idx + 1;
                        slots[g][idx] = SlotState::InFlight;
                        action[g] = Some(Action::OwnAlpha {
                            idx,
                            rem: hw.c_alpha,
                        });
                    }
                    SlotState::InFlight => {} // an assistant is on it; wait
                    SlotState::Consumed => unreachable!("blend pointer passed a consumed slot"),
                }
            } else if scheduler_on {
                // Assist the busiest target with claimable work and an open
                // buffer window; ties resolve to the lowest index.
                let mut best: Option<(usize, usize)> = None; // (remaining, target)
                for t in 0..n {
                    if t == g {
                        continue;
                    }
                    let remaining = queue_len[t] - claimed[t];
                    let window_open = claimed[t] - blended[t] < hw.alpha_buffer_capacity;
                    if remaining > 0 && window_open {
                        let better = match best {
                            None => true,
                            Some((r, _)) => remaining > r,
                        };
                        if better {
                            best = Some((remaining, t));
                        }
                    }
                }
                if let Some((_, t)) = best {
                    let idx = claimed[t];
                    claimed[t] = idx + 1;
                    slots[t][idx] = SlotState::InFlight;
                    action[g] = Some(Action::AssistAlpha {
                        target: t,
                        idx,
                        rem: hw.c_alpha,
                    });
                }
            }
        }

        // Execute phase.
        cycles += 1;
        for g in 0..n {
            match &mut action[g] {
                Some(Action::OwnAlpha { rem, .. }) | Some(Action::Blend { rem, .. }) => {
                    busy[g] += 1;
                    *rem -= 1;
                }
                Some(Action::AssistAlpha { rem, .. }) => {
                    assist[g] += 1;
                    *rem -= 1;
                }
                None => idle[g] += 1,
            }
        }

        // Completion phase.
        for g in 0..n {
            match action[g] {
                Some(Action::OwnAlpha { idx, rem: 0 }) => {
                    // Own alpha feeds the blend directly, no buffer traffic.
                    slots[g][idx] = SlotState::Consumed;
                    action[g] = Some(Action::Blend {
                        idx,
                        rem: hw.c_blend,
                    });
                }
                Some(Action::Blend { idx, rem: 0 }) => {
                    debug_assert_eq!(blended[g], idx);
                    blended[g] = idx + 1;
                    action[g] = None;
                }
                Some(Action::AssistAlpha { target, idx, rem: 0 }) => {
                    slots[target][idx] = SlotState::Ready;
                    ready_count[target] += 1;
                    debug_assert!(ready_count[target] <= hw.alpha_buffer_capacity);
                    action[g] = None;
                }
                _ => {}
            }
        }
    }

    let total_evals: u64 = queue_len.iter().map(|l| *l as u64).sum();
    Ok(GroupSimResult {
        cycles,
        busy,
        idle,
        assist,
        colors: replay_colors(trace),
        alpha_ops: total_evals,
        blend_ops: total_evals,
        alpha_buffer_hits: buffer_hits,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrameRenderStats {
    /// Makespan of the tile traces over the configured number of groups.
    pub cycles: u64,
    pub stats: SimStats,
}

/// Schedules a frame's tile traces across the GS array: each tile goes to
/// the earliest-available group (ties to the lowest group index). Also
/// charges the per-tile Gaussian feature fetches to DRAM.
pub fn simulate_frame_render(
    trace: &FrameTrace,
    hw: &HardwareConfig,
    scheduler_on: bool,
) -> Result<FrameRenderStats, SimError> {
    simulate_frame_render_on(trace, hw, scheduler_on, hw.num_gpe_groups)
}

/// As [`simulate_frame_render`] over an explicit number of GPE groups (the
/// pose tracking engine's light GS array has half the mapping engine's).
pub fn simulate_frame_render_on(
    trace: &FrameTrace,
    hw: &HardwareConfig,
    scheduler_on: bool,
    num_groups: usize,
) -> Result<FrameRenderStats, SimError> {
    assert!(num_groups > 0);
    let mut avail = vec![0u64; num_groups];
    let mut stats = SimStats::default();
    for tile in &trace.tiles {
        let result = simulate_tile_render(tile, hw, scheduler_on)?;
        let group = (0..avail.len())
            .min_by_key(|g| (avail[*g], *g))
            .expect("at least one group");
        avail[group] += result.cycles;
        stats.add_counters(&result.stats());

        // Distinct Gaussians touched by this tile are fetched once each.
        let mut ids: Vec<u64> = tile
            .pixels
            .iter()
            .flat_map(|p| p.evals.iter().map(|e| e.id))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        let bytes = (ids.len() * hw.gaussian_fetch_bytes) as u64;
        stats.dram_reads += ids.len() as u64;
        stats.dram_read_bytes += bytes;
    }
    let cycles = avail.into_iter().max().unwrap_or(0);
    stats.cycles = cycles;
    Ok(FrameRenderStats { cycles, stats })
}

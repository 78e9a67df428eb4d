//! Two-engine pipeline model.
//!
//! The pose tracking engine (covisibility detection, coarse estimation,
//! optional refinement) and the mapping engine run on independent hardware:
//! frame t+1's tracking starts as soon as frame t's tracking completes,
//! while frame t's mapping proceeds concurrently. Mapping of frame t waits
//! for both its own tracking result and the previous frame's mapping.

use crate::error::SimError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameTask {
    pub fc_cycles: u64,
    pub coarse_cycles: u64,
    pub refine_cycles: u64,
    pub mapping_cycles: u64,
}

impl FrameTask {
    pub fn tracking_cycles(&self) -> u64 {
        self.fc_cycles + self.coarse_cycles + self.refine_cycles
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub pipelined_makespan: u64,
    pub serialized_makespan: u64,
    pub track_end: Vec<u64>,
    pub map_end: Vec<u64>,
}

pub fn simulate_pipeline(schedule: &[FrameTask]) -> Result<PipelineResult, SimError> {
    if schedule.is_empty() {
        return Err(SimError::EmptySchedule);
    }
    let mut track_end = Vec::with_capacity(schedule.len());
    let mut map_end = Vec::with_capacity(schedule.len());
    let mut prev_track_end = 0u64;
    let mut prev_map_end = 0u64;
    let mut serialized = 0u64;
    for task in schedule {
        let t_end = prev_track_end + task.tracking_cycles();
        let m_end = t_end.max(prev_map_end) + task.mapping_cycles;
        track_end.push(t_end);
        map_end.push(m_end);
        prev_track_end = t_end;
        prev_map_end = m_end;
        serialized += task.tracking_cycles() + task.mapping_cycles;
    }
    Ok(PipelineResult {
        pipelined_makespan: prev_track_end.max(prev_map_end),
        serialized_makespan: serialized,
        track_end,
        map_end,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(track: u64, map: u64) -> FrameTask {
        FrameTask {
            fc_cycles: 0,
            coarse_cycles: 0,
            refine_cycles: track,
            mapping_cycles: map,
        }
    }

    #[test]
    fn single_frame_has_no_overlap() {
        let r = simulate_pipeline(&[task(100, 200)]).unwrap();
        assert_eq!(r.pipelined_makespan, r.serialized_makespan);
        assert_eq!(r.pipelined_makespan, 300);
    }

    #[test]
    fn second_tracking_hides_under_first_mapping() {
        // Frame 2's tracking (80) fits inside frame 1's mapping (200).
        let r = simulate_pipeline(&[task(100, 200), task(80, 150)]).unwrap();
        assert_eq!(r.serialized_makespan, 530);
        assert_eq!(r.pipelined_makespan, 530 - 80);
    }

    #[test]
    fn empty_schedule_rejected() {
        assert!(matches!(
            simulate_pipeline(&[]),
            Err(SimError::EmptySchedule)
        ));
    }

    #[test]
    fn all_cycle_components_count_toward_tracking() {
        let t = FrameTask {
            fc_cycles: 5,
            coarse_cycles: 7,
            refine_cycles: 11,
            mapping_cycles: 13,
        };
        assert_eq!(t.tracking_cycles(), 23);
        let r = simulate_pipeline(&[t]).unwrap();
        assert_eq!(r.serialized_makespan, 36);
    }
}

//! Throughput models for the systolic coarse estimator and the covisibility
//! detection front end.

use crate::config::HardwareConfig;
use crate::stats::SimStats;

/// Cycles for `mac_count` multiply-accumulates on the systolic arrays, plus
/// a fixed fill/drain overhead.
pub fn coarse_estimator_cycles(mac_count: u64, hw: &HardwareConfig) -> u64 {
    mac_count.div_ceil(hw.macs_per_cycle()) + hw.systolic_fill_drain_cycles
}

/// Covisibility detection: stream the per-block minimum SADs from DRAM
/// (4 bytes each), accumulate them on the adders, and compare the result
/// against the configured thresholds.
pub fn fc_detection_cycles(num_blocks: u64, num_thresholds: u64, hw: &HardwareConfig) -> (u64, SimStats) {
    let bytes = num_blocks * 4;
    let mut stats = SimStats {
        dram_reads: num_blocks,
        dram_read_bytes: bytes,
        sad_adds: num_blocks,
        compares: num_thresholds,
        ..Default::default()
    };
    let cycles = hw.dram.stream_cycles(bytes)
        + num_blocks.div_ceil(hw.fc_adders as u64)
        + num_thresholds.div_ceil(hw.fc_comparators as u64);
    stats.cycles = cycles;
    (cycles, stats)
}

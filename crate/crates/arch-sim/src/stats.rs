//! Simulation counters.

use crate::config::EnergyWeights;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub cycles: u64,
    pub gpe_busy: u64,
    pub gpe_idle: u64,
    pub gpe_assist: u64,
    pub alpha_ops: u64,
    pub blend_ops: u64,
    pub grad_ops: u64,
    pub macs: u64,
    pub sad_adds: u64,
    pub compares: u64,
    pub table_updates: u64,
    pub dram_reads: u64,
    pub dram_writes: u64,
    pub dram_read_bytes: u64,
    pub dram_write_bytes: u64,
    pub alpha_buffer_hits: u64,
}

impl SimStats {
    /// Accumulates a sequentially-executed segment: cycles add.
    pub fn merge_serial(&mut self, other: &SimStats) {
        self.cycles += other.cycles;
        self.add_counters(other);
    }

    /// Accumulates counters without touching cycles (for segments whose
    /// timing is accounted elsewhere, e.g. pipelined engines).
    pub fn add_counters(&mut self, other: &SimStats) {
        self.gpe_busy += other.gpe_busy;
        self.gpe_idle += other.gpe_idle;
        self.gpe_assist += other.gpe_assist;
        self.alpha_ops += other.alpha_ops;
        self.blend_ops += other.blend_ops;
        self.grad_ops += other.grad_ops;
        self.macs += other.macs;
        self.sad_adds += other.sad_adds;
        self.compares += other.compares;
        self.table_updates += other.table_updates;
        self.dram_reads += other.dram_reads;
        self.dram_writes += other.dram_writes;
        self.dram_read_bytes += other.dram_read_bytes;
        self.dram_write_bytes += other.dram_write_bytes;
        self.alpha_buffer_hits += other.alpha_buffer_hits;
    }

    /// All counters (including cycles) multiplied by `k`: the cost of
    /// repeating a measured segment `k` times.
    pub fn scaled(&self, k: u64) -> SimStats {
        SimStats {
            cycles: self.cycles * k,
            gpe_busy: self.gpe_busy * k,
            gpe_idle: self.gpe_idle * k,
            gpe_assist: self.gpe_assist * k,
            alpha_ops: self.alpha_ops * k,
            blend_ops: self.blend_ops * k,
            grad_ops: self.grad_ops * k,
            macs: self.macs * k,
            sad_adds: self.sad_adds * k,
            compares: self.compares * k,
            table_updates: self.table_updates * k,
            dram_reads: self.dram_reads * k,
            dram_writes: self.dram_writes * k,
            dram_read_bytes: self.dram_read_bytes * k,
            dram_write_bytes: self.dram_write_bytes * k,
            alpha_buffer_hits: self.alpha_buffer_hits * k,
        }
    }

    /// busy / (busy + idle); assist time is accounted separately.
    pub fn utilization(&self) -> f64 {
        let denom = self.gpe_busy + self.gpe_idle;
        if denom == 0 {
            0.0
        } else {
            self.gpe_busy as f64 / denom as f64
        }
    }

    /// Weighted sum of operation counts; linear in every counter.
    pub fn energy_proxy(&self, w: &EnergyWeights) -> f64 {
        self.alpha_ops as f64 * w.alpha
            + self.blend_ops as f64 * w.blend
            + self.grad_ops as f64 * w.grad
            + self.macs as f64 * w.mac
            + self.sad_adds as f64 * w.sad_add
            + self.compares as f64 * w.compare
            + self.table_updates as f64 * w.table_update
            + self.dram_read_bytes as f64 * w.dram_read_byte
            + self.dram_write_bytes as f64 * w.dram_write_byte
    }

    pub fn dram_total_bytes(&self) -> u64 {
        self.dram_read_bytes + self.dram_write_bytes
    }
}

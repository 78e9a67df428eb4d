//! Hardware configuration presets.
//!
//! The structural parameters (GPE array shape, systolic arrays, buffer and
//! table sizes, clock, DRAM technology) follow the edge and server design
//! points; per-operation cycle costs and energy weights are model knobs, so
//! all acceptance checks on top of them are relative (ratios and
//! inequalities), never absolute cycle counts.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DramConfig {
    pub name: String,
    pub bandwidth_bytes_per_cycle: f64,
    pub latency_cycles: u64,
}

impl DramConfig {
    /// LPDDR4-3200, ~25.6 GB/s at a 500 MHz core clock.
    pub fn lpddr4() -> Self {
        Self {
            name: "LPDDR4-3200".to_string(),
            bandwidth_bytes_per_cycle: 51.2,
            latency_cycles: 50,
        }
    }

    /// HBM2, ~256 GB/s at a 500 MHz core clock.
    pub fn hbm2() -> Self {
        Self {
            name: "HBM2".to_string(),
            bandwidth_bytes_per_cycle: 512.0,
            latency_cycles: 30,
        }
    }

    /// Cycles to stream `bytes` through this channel, one fixed latency per
    /// burst.
    pub fn stream_cycles(&self, bytes: u64) -> u64 {
        if bytes == 0 {
            return 0;
        }
        self.latency_cycles + (bytes as f64 / self.bandwidth_bytes_per_cycle).ceil() as u64
    }
}

/// Per-operation-class weights of the energy proxy; the proxy is the plain
/// weighted sum of operation counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyWeights {
    pub alpha: f64,
    pub blend: f64,
    pub grad: f64,
    pub mac: f64,
    pub sad_add: f64,
    pub compare: f64,
    pub table_update: f64,
    pub dram_read_byte: f64,
    pub dram_write_byte: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        Self {
            alpha: 4.0,
            blend: 1.0,
            grad: 6.0,
            mac: 0.5,
            sad_add: 0.25,
            compare: 0.1,
            table_update: 0.5,
            dram_read_byte: 2.0,
            dram_write_byte: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareConfig {
    pub name: String,
    /// Groups of 4x4 GPEs in the mapping-engine GS array.
    pub num_gpe_groups: usize,
    /// GPEs per group; one pixel each.
    pub gpes_per_group: usize,
    pub systolic_arrays: usize,
    pub systolic_dim: usize,
    pub systolic_fill_drain_cycles: u64,
    pub gauss_buffer_bytes: usize,
    pub logging_table_bytes: usize,
    pub skipping_table_bytes: usize,
    /// Contribution record entry: 4-byte id + 4-byte count.
    pub record_entry_bytes: usize,
    /// Bytes fetched per Gaussian per tile render.
    pub gaussian_fetch_bytes: usize,
    pub clock_mhz: u64,
    /// Alpha-buffer capacity per target GPE, in entries.
    pub alpha_buffer_capacity: usize,
    /// Tiles evaluated together for hot/cold speculation.
    pub prefetch_window_tiles: usize,
    /// Occurrences within the window that make a Gaussian hot.
    pub hot_threshold: usize,
    /// Cycles per alpha evaluation.
    pub c_alpha: u32,
    /// Cycles per blend accumulation.
    pub c_blend: u32,
    /// Cycles per gradient op.
    pub c_grad: u32,
    pub fc_adders: usize,
    pub fc_comparators: usize,
    pub dram: DramConfig,
    pub energy: EnergyWeights,
}

impl HardwareConfig {
    pub fn edge() -> Self {
        Self {
            name: "edge".to_string(),
            num_gpe_groups: 16,
            gpes_per_group: 16,
            systolic_arrays: 2,
            systolic_dim: 32,
            systolic_fill_drain_cycles: 64,
            gauss_buffer_bytes: 64 * 1024,
            logging_table_bytes: 4 * 1024,
            skipping_table_bytes: 4 * 1024,
            record_entry_bytes: 8,
            gaussian_fetch_bytes: 64,
            clock_mhz: 500,
            alpha_buffer_capacity: 8,
            prefetch_window_tiles: 16,
            hot_threshold: 2,
            c_alpha: 4,
            c_blend: 1,
            c_grad: 6,
            fc_adders: 8,
            fc_comparators: 2,
            dram: DramConfig::lpddr4(),
            energy: EnergyWeights::default(),
        }
    }

    pub fn server() -> Self {
        Self {
            name: "server".to_string(),
            num_gpe_groups: 32,
            systolic_arrays: 4,
            gauss_buffer_bytes: 128 * 1024,
            logging_table_bytes: 8 * 1024,
            skipping_table_bytes: 8 * 1024,
            dram: DramConfig::hbm2(),
            ..Self::edge()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "edge" => Some(Self::edge()),
            "server" => Some(Self::server()),
            _ => None,
        }
    }

    pub fn macs_per_cycle(&self) -> u64 {
        (self.systolic_arrays * self.systolic_dim * self.systolic_dim) as u64
    }

    pub fn total_gpes(&self) -> u64 {
        (self.num_gpe_groups * self.gpes_per_group) as u64
    }

    /// Groups in the pose tracking engine's light GS array (half the
    /// mapping engine's array).
    pub fn light_groups(&self) -> usize {
        (self.num_gpe_groups / 2).max(1)
    }

    pub fn light_gpes(&self) -> u64 {
        (self.light_groups() * self.gpes_per_group) as u64
    }

    pub fn logging_buffer_entries(&self) -> usize {
        self.logging_table_bytes / self.record_entry_bytes
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            self.num_gpe_groups,
            self.gpes_per_group,
            self.systolic_arrays,
            self.systolic_dim,
            self.record_entry_bytes,
            self.gaussian_fetch_bytes,
            self.alpha_buffer_capacity,
            self.prefetch_window_tiles,
            self.hot_threshold,
            self.fc_adders,
            self.fc_comparators,
        ];
        if positive.iter().any(|v| *v == 0) {
            return Err("hardware counts must be strictly positive".into());
        }
        if self.c_alpha == 0 || self.c_blend == 0 || self.c_grad == 0 {
            return Err("cycle costs must be strictly positive".into());
        }
        if self.dram.bandwidth_bytes_per_cycle <= 0.0 {
            return Err("dram bandwidth must be positive".into());
        }
        Ok(())
    }
}

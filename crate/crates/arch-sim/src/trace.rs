//! Evaluation traces: per-pixel lists of evaluated Gaussians in blend order,
//! captured from the functional renderer. Stored as JSON lines, one tile
//! trace per line.

use crate::error::SimError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

/// One evaluated Gaussian at one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussWork {
    pub id: u64,
    pub alpha: f64,
    pub color: [f64; 3],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PixelTrace {
    pub evals: Vec<GaussWork>,
}

/// Work of one 4x4 pixel group.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TileTrace {
    pub pixels: Vec<PixelTrace>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameTrace {
    pub tiles: Vec<TileTrace>,
}

impl FrameTrace {
    /// Cuts a frame's per-pixel evaluation lists into `group_dim` x
    /// `group_dim` tiles. `colors` maps Gaussian ids to their RGB.
    pub fn from_evals(
        width: usize,
        height: usize,
        evals: &[Vec<(u64, f64)>],
        colors: &BTreeMap<u64, [f64; 3]>,
        group_dim: usize,
    ) -> Self {
        assert_eq!(evals.len(), width * height);
        let mut tiles = Vec::new();
        for by in (0..height).step_by(group_dim) {
            for bx in (0..width).step_by(group_dim) {
                let mut pixels = Vec::new();
                for y in by..(by + group_dim).min(height) {
                    for x in bx..(bx + group_dim).min(width) {
                        let work = evals[y * width + x]
                            .iter()
                            .map(|(id, alpha)| GaussWork {
                                id: *id,
                                alpha: *alpha,
                                color: colors.get(id).copied().unwrap_or([0.0; 3]),
                            })
                            .collect();
                        pixels.push(PixelTrace { evals: work });
                    }
                }
                tiles.push(TileTrace { pixels });
            }
        }
        Self { tiles }
    }

    pub fn total_evals(&self) -> u64 {
        self.tiles
            .iter()
            .flat_map(|t| &t.pixels)
            .map(|p| p.evals.len() as u64)
            .sum()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), SimError> {
        for tile in &self.tiles {
            serde_json::to_writer(&mut w, tile)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, SimError> {
        let mut tiles = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            tiles.push(serde_json::from_str(&line)?);
        }
        Ok(Self { tiles })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_roundtrip_preserves_alphas_exactly() {
        let trace = FrameTrace {
            tiles: vec![TileTrace {
                pixels: vec![PixelTrace {
                    evals: vec![GaussWork {
                        id: 3,
                        alpha: 0.123456789012345678,
                        color: [0.25, 0.5, 1.0 / 3.0],
                    }],
                }],
            }],
        };
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let back = FrameTrace::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(trace, back);
    }

    #[test]
    fn from_evals_partitions_the_frame() {
        let evals = vec![vec![(1u64, 0.5f64)]; 8 * 8];
        let mut colors = BTreeMap::new();
        colors.insert(1u64, [1.0, 0.0, 0.0]);
        let trace = FrameTrace::from_evals(8, 8, &evals, &colors, 4);
        assert_eq!(trace.tiles.len(), 4);
        assert!(trace.tiles.iter().all(|t| t.pixels.len() == 16));
        assert_eq!(trace.total_evals(), 64);
    }
}

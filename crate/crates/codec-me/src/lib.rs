//! Emulation of a video CODEC's motion-estimation pass and the frame
//! covisibility metric built on it.
//!
//! Frames are converted to 8-bit luma and split into macro-blocks. For each
//! block of the current frame an exhaustive search over integer offsets
//! within the search radius finds the minimum-SAD match in the previous
//! frame. The per-block minimum SADs accumulate into a covisibility score
//! `fc = 1 - total_sad / (W*H*255)`, quantized into five levels.
//!
//! Motion vector convention: a block at origin `o` in the current frame
//! matches the block at `o + (dx, dy)` in the previous frame. Content that
//! moved right by `k` pixels between the frames therefore yields `dx = -k`.

use splat_core::ColorImage;

pub const DEFAULT_BLOCK_SIZE: usize = 8;
pub const DEFAULT_SEARCH_RADIUS: i32 = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionConfig {
    pub block_size: usize,
    pub search_radius: i32,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            block_size: DEFAULT_BLOCK_SIZE,
            search_radius: DEFAULT_SEARCH_RADIUS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LumaImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl LumaImage {
    pub fn from_data(width: usize, height: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Edge-replicated sampling for coordinates outside the image.
    pub fn sample_replicated(&self, x: i64, y: i64) -> u8 {
        let cx = x.clamp(0, self.width as i64 - 1) as usize;
        let cy = y.clamp(0, self.height as i64 - 1) as usize;
        self.data[cy * self.width + cx]
    }

    pub fn samples(&self) -> &[u8] {
        &self.data
    }
}

/// BT.601 luma: `round(255 * (0.299 R + 0.587 G + 0.114 B))`.
pub fn to_luma(img: &ColorImage) -> LumaImage {
    let data = img
        .pixels()
        .iter()
        .map(|c| {
            let y = 255.0 * (0.299 * c.x + 0.587 * c.y + 0.114 * c.z);
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    LumaImage::from_data(img.width(), img.height(), data)
}

/// One macro-block: origin in pixel coordinates plus its (edge-replicated)
/// luma samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroBlock {
    pub origin_x: usize,
    pub origin_y: usize,
    pub samples: Vec<u8>,
}

/// Row-major macro-block decomposition; partial edge blocks are padded by
/// edge replication so every block is full-size.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroBlockGrid {
    pub block_size: usize,
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub blocks: Vec<MacroBlock>,
}

impl MacroBlockGrid {
    pub fn from_luma(img: &LumaImage, block_size: usize) -> Self {
        assert!(block_size > 0);
        let blocks_x = img.width().div_ceil(block_size);
        let blocks_y = img.height().div_ceil(block_size);
        let mut blocks = Vec::with_capacity(blocks_x * blocks_y);
        for by in 0..blocks_y {
            for bx in 0..blocks_x {
                let ox = bx * block_size;
                let oy = by * block_size;
                let mut samples = Vec::with_capacity(block_size * block_size);
                for dy in 0..block_size {
                    for dx in 0..block_size {
                        samples.push(img.sample_replicated((ox + dx) as i64, (oy + dy) as i64));
                    }
                }
                blocks.push(MacroBlock {
                    origin_x: ox,
                    origin_y: oy,
                    samples,
                });
            }
        }
        Self {
            block_size,
            blocks_x,
            blocks_y,
            blocks,
        }
    }
}

/// Sum of absolute differences between two equally-sized sample slices.
pub fn block_sad(a: &[u8], b: &[u8]) -> u64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x as i64 - *y as i64).unsigned_abs())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MotionResult {
    pub block_x: usize,
    pub block_y: usize,
    pub origin_x: usize,
    pub origin_y: usize,
    pub dx: i32,
    pub dy: i32,
    pub sad: u64,
}

/// Exhaustive search over all integer offsets within the radius, sampling the
/// previous frame with edge replication. Ties break toward the smallest
/// |dx|+|dy|, then toward the earliest offset in row-major (dy, dx) order.
pub fn motion_search(
    block: &MacroBlock,
    prev: &LumaImage,
    block_size: usize,
    search_radius: i32,
) -> MotionResult {
    debug_assert!(search_radius >= 0);
    let mut best_sad = u64::MAX;
    let mut best = (0i32, 0i32);
    for dy in -search_radius..=search_radius {
        for dx in -search_radius..=search_radius {
            let mut sad = 0u64;
            let mut i = 0;
            for ry in 0..block_size {
                let py = block.origin_y as i64 + ry as i64 + dy as i64;
                for rx in 0..block_size {
                    let px = block.origin_x as i64 + rx as i64 + dx as i64;
                    let p = prev.sample_replicated(px, py) as i64;
                    sad += (block.samples[i] as i64 - p).unsigned_abs();
                    i += 1;
                }
            }
            let better = sad < best_sad
                || (sad == best_sad && dx.abs() + dy.abs() < best.0.abs() + best.1.abs());
            if better {
                best_sad = sad;
                best = (dx, dy);
            }
        }
    }
    MotionResult {
        block_x: block.origin_x / block_size,
        block_y: block.origin_y / block_size,
        origin_x: block.origin_x,
        origin_y: block.origin_y,
        dx: best.0,
        dy: best.1,
        sad: best_sad,
    }
}

/// Per-block motion results between two luma frames.
pub fn motion_field(cur: &LumaImage, prev: &LumaImage, cfg: &MotionConfig) -> Vec<MotionResult> {
    assert_eq!(cur.width(), prev.width());
    assert_eq!(cur.height(), prev.height());
    let grid = MacroBlockGrid::from_luma(cur, cfg.block_size);
    grid.blocks
        .iter()
        .map(|b| motion_search(b, prev, cfg.block_size, cfg.search_radius))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovisibilityReport {
    pub total_sad: u64,
    /// In [0, 1]; 1 means identical content.
    pub fc: f64,
    /// Quantized covisibility, 1 (lowest) through 5 (highest).
    pub level: u8,
}

impl CovisibilityReport {
    pub fn from_total_sad(total_sad: u64, width: usize, height: usize) -> Self {
        let max_sad = (width * height * 255) as f64;
        let fc = (1.0 - total_sad as f64 / max_sad).clamp(0.0, 1.0);
        let level = (1 + (fc * 5.0).floor() as u8).min(5);
        Self {
            total_sad,
            fc,
            level,
        }
    }
}

pub fn covisibility_of_field(
    field: &[MotionResult],
    width: usize,
    height: usize,
) -> CovisibilityReport {
    let total: u64 = field.iter().map(|m| m.sad).sum();
    CovisibilityReport::from_total_sad(total, width, height)
}

/// Covisibility of `cur` with `prev`: accumulate the per-block minimum SADs
/// and normalize by the maximum possible SAD of the frame.
pub fn frame_covisibility(
    cur: &ColorImage,
    prev: &ColorImage,
    cfg: &MotionConfig,
) -> CovisibilityReport {
    let cur_luma = to_luma(cur);
    let prev_luma = to_luma(prev);
    let field = motion_field(&cur_luma, &prev_luma, cfg);
    covisibility_of_field(&field, cur.width(), cur.height())
}

//! RGB-D frame containers. Channels are f64 in [0, 1]; depth is camera-frame
//! z in world units with non-positive or non-finite samples treated as
//! invalid.

use crate::types::Pose;
use nalgebra::Vector3;

#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    data: Vec<Vector3<f64>>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![Vector3::zeros(); width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<Vector3<f64>>) -> Self {
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

    pub fn get(&self, x: usize, y: usize) -> Vector3<f64> {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Vector3<f64>) {
        self.data[y * self.width + x] = c;
    }

    pub fn pixels(&self) -> &[Vector3<f64>] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [Vector3<f64>] {
        &mut self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Self {
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

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, d: f64) {
        self.data[y * self.width + x] = d;
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        let d = self.get(x, y);
        d.is_finite() && d > 0.0
    }

    pub fn samples(&self) -> &[f64] {
        &self.data
    }
}

/// One RGB-D input frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: u64,
    pub timestamp: f64,
    pub color: ColorImage,
    pub depth: DepthImage,
    pub gt_pose: Option<Pose>,
}

impl Frame {
    pub fn width(&self) -> usize {
        self.color.width()
    }

    pub fn height(&self) -> usize {
        self.color.height()
    }
}

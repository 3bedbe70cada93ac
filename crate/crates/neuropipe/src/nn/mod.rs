//! Differentiable operators and losses. Everything runs in double
//! precision with hand-written backward passes; each backward is verified
//! against central finite differences (see [`crate::gradcheck`]).

mod layers;
mod loss;
mod ops;

pub use layers::{Conv2d, Dropout, Linear, Param, Sgd};
pub use loss::{
    bce_with_logits, multiclass_hinge_loss, multitask_loss, smooth_l1, softmax_ce,
};
pub use ops::{
    avgpool_backward, avgpool_forward, l2pool_backward, l2pool_forward, maxpool_backward,
    maxpool_forward, pool_forward, pool_output_dims, relu, relu_backward, roi_spp_backward,
    roi_spp_pool, PoolKind,
};

use crate::error::{Error, Result};
use crate::volume::SliceStack;

/// A channels x height x width activation grid in double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        FeatureMap { c, h, w, data: vec![0.0; c * h * w] }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != c * h * w {
            return Err(Error::ShapeMismatch {
                reason: format!("{c}x{h}x{w} needs {} values, got {}", c * h * w, data.len()),
            });
        }
        Ok(FeatureMap { c, h, w, data })
    }

    /// Promotes a slice stack's f32 pixels to a double-precision map.
    pub fn from_stack(stack: &SliceStack) -> Self {
        FeatureMap {
            c: stack.channels(),
            h: stack.height(),
            w: stack.width(),
            data: stack.pixels().iter().map(|&v| v as f64).collect(),
        }
    }

    #[inline]
    pub fn at(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[(c * self.h + i) * self.w + j]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, i: usize, j: usize) -> &mut f64 {
        &mut self.data[(c * self.h + i) * self.w + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Borrow one channel as a contiguous row-major plane.
    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.h * self.w..(c + 1) * self.h * self.w]
    }

    pub fn flatten(&self) -> &[f64] {
        &self.data
    }
}

/// Pooling window and stride.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolSpec {
    pub window: (usize, usize),
    pub stride: (usize, usize),
}

impl PoolSpec {
    pub fn square(window: usize, stride: usize) -> Self {
        PoolSpec { window: (window, window), stride: (stride, stride) }
    }
}

/// A region of interest on a feature map plus the fixed pooled output size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Roi {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub output_size: (usize, usize),
}

impl Roi {
    pub fn new(b: &crate::boxes::BoundingBox, output_size: (usize, usize)) -> Self {
        Roi { x_min: b.x_min, y_min: b.y_min, x_max: b.x_max, y_max: b.y_max, output_size }
    }
}

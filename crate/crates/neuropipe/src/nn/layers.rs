//! Trainable layers with hand-written backward passes, plus plain SGD.

use super::FeatureMap;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One parameter tensor with its gradient accumulator and momentum buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub v: Vec<f64>,
    pub g: Vec<f64>,
    pub m: Vec<f64>,
}

impl Param {
    pub fn zeros(n: usize) -> Self {
        Param { v: vec![0.0; n], g: vec![0.0; n], m: vec![0.0; n] }
    }

    /// Fan-in-scaled uniform init (He bound, rectifier networks).
    pub fn he_uniform(n: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / fan_in.max(1) as f64).sqrt();
        Param {
            v: (0..n).map(|_| rng.gen_range(-bound..bound)).collect(),
            g: vec![0.0; n],
            m: vec![0.0; n],
        }
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.g {
            *g = 0.0;
        }
    }
}

/// Plain SGD with momentum and optional decoupled weight decay.
#[derive(Debug, Clone, Copy)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Sgd {
    pub fn step(&self, p: &mut Param) {
        for i in 0..p.v.len() {
            let g = p.g[i] + self.weight_decay * p.v[i];
            p.m[i] = self.momentum * p.m[i] + g;
            p.v[i] -= self.learning_rate * p.m[i];
        }
    }
}

/// 2D convolution with configurable stride and symmetric zero padding.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub weight: Param, // out_ch * in_ch * kh * kw
    pub bias: Param,   // out_ch
}

impl Conv2d {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan_in = in_ch * kernel * kernel;
        Conv2d {
            in_ch,
            out_ch,
            kh: kernel,
            kw: kernel,
            stride,
            pad,
            weight: Param::he_uniform(out_ch * fan_in, fan_in, rng),
            bias: Param::zeros(out_ch),
        }
    }

    /// Output spatial size, or None when the kernel no longer fits.
    pub fn output_dims(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let ph = h + 2 * self.pad;
        let pw = w + 2 * self.pad;
        if ph < self.kh || pw < self.kw {
            return None;
        }
        Some(((ph - self.kh) / self.stride + 1, (pw - self.kw) / self.stride + 1))
    }

    pub fn param_count(&self) -> u64 {
        (self.weight.v.len() + self.bias.v.len()) as u64
    }

    #[inline]
    fn w_at(&self, o: usize, c: usize, p: usize, q: usize) -> f64 {
        self.weight.v[((o * self.in_ch + c) * self.kh + p) * self.kw + q]
    }

    pub fn forward(&self, x: &FeatureMap) -> FeatureMap {
        assert_eq!(x.c, self.in_ch, "conv input channels");
        let (oh, ow) = self.output_dims(x.h, x.w).expect("conv output collapsed");
        let mut y = FeatureMap::zeros(self.out_ch, oh, ow);
        let s = self.stride as i64;
        let pad = self.pad as i64;
        for o in 0..self.out_ch {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = self.bias.v[o];
                    for c in 0..self.in_ch {
                        for p in 0..self.kh {
                            let r = i as i64 * s + p as i64 - pad;
                            if r < 0 || r >= x.h as i64 {
                                continue;
                            }
                            for q in 0..self.kw {
                                let col = j as i64 * s + q as i64 - pad;
                                if col < 0 || col >= x.w as i64 {
                                    continue;
                                }
                                acc += self.w_at(o, c, p, q) * x.at(c, r as usize, col as usize);
                            }
                        }
                    }
                    *y.at_mut(o, i, j) = acc;
                }
            }
        }
        y
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    pub fn backward(&mut self, x: &FeatureMap, grad_out: &FeatureMap) -> FeatureMap {
        let (oh, ow) = self.output_dims(x.h, x.w).expect("conv output collapsed");
        assert_eq!(grad_out.shape(), (self.out_ch, oh, ow), "conv grad shape");
        let mut gx = FeatureMap::zeros(x.c, x.h, x.w);
        let s = self.stride as i64;
        let pad = self.pad as i64;
        for o in 0..self.out_ch {
            for i in 0..oh {
                for j in 0..ow {
                    let g = grad_out.at(o, i, j);
                    if g == 0.0 {
                        continue;
                    }
                    self.bias.g[o] += g;
                    for c in 0..self.in_ch {
                        for p in 0..self.kh {
                            let r = i as i64 * s + p as i64 - pad;
                            if r < 0 || r >= x.h as i64 {
                                continue;
                            }
                            for q in 0..self.kw {
                                let col = j as i64 * s + q as i64 - pad;
                                if col < 0 || col >= x.w as i64 {
                                    continue;
                                }
                                let widx = ((o * self.in_ch + c) * self.kh + p) * self.kw + q;
                                self.weight.g[widx] += g * x.at(c, r as usize, col as usize);
                                *gx.at_mut(c, r as usize, col as usize) += g * self.weight.v[widx];
                            }
                        }
                    }
                }
            }
        }
        gx
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

/// Fully connected layer on flat vectors.
#[derive(Debug, Clone)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Param, // out * in, row-major
    pub bias: Param,
}

impl Linear {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Linear {
            in_dim,
            out_dim,
            weight: Param::he_uniform(out_dim * in_dim, in_dim, rng),
            bias: Param::zeros(out_dim),
        }
    }

    pub fn param_count(&self) -> u64 {
        (self.weight.v.len() + self.bias.v.len()) as u64
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.in_dim, "linear input dim");
        let mut y = Vec::with_capacity(self.out_dim);
        for o in 0..self.out_dim {
            let row = &self.weight.v[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.bias.v[o];
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            y.push(acc);
        }
        y
    }

    pub fn backward(&mut self, x: &[f64], grad_out: &[f64]) -> Vec<f64> {
        assert_eq!(grad_out.len(), self.out_dim, "linear grad dim");
        let mut gx = vec![0.0; self.in_dim];
        for o in 0..self.out_dim {
            let g = grad_out[o];
            if g == 0.0 {
                continue;
            }
            self.bias.g[o] += g;
            let row = o * self.in_dim;
            for i in 0..self.in_dim {
                self.weight.g[row + i] += g * x[i];
                gx[i] += g * self.weight.v[row + i];
            }
        }
        gx
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

/// Inverted dropout; the mask is drawn by the caller's seeded stream so
/// training stays reproducible. Identity in eval mode (no draw at all).
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Self {
        assert!((0.0..1.0).contains(&rate), "dropout rate in [0,1)");
        Dropout { rate }
    }

    /// Draws a mask and applies it: kept units scale by 1/(1-rate).
    pub fn forward_train(&self, x: &[f64], rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>) {
        if self.rate == 0.0 {
            return (x.to_vec(), vec![true; x.len()]);
        }
        let keep = 1.0 - self.rate;
        let mask: Vec<bool> = (0..x.len()).map(|_| rng.gen::<f64>() < keep).collect();
        let y = x
            .iter()
            .zip(&mask)
            .map(|(&v, &k)| if k { v / keep } else { 0.0 })
            .collect();
        (y, mask)
    }

    pub fn backward(&self, grad_out: &[f64], mask: &[bool]) -> Vec<f64> {
        if self.rate == 0.0 {
            return grad_out.to_vec();
        }
        let keep = 1.0 - self.rate;
        grad_out
            .iter()
            .zip(mask)
            .map(|(&g, &k)| if k { g / keep } else { 0.0 })
            .collect()
    }
}

/// ReLU on flat vectors (feature-map relu lives in ops).
pub fn relu_vec(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

pub fn relu_vec_backward(x: &[f64], grad_out: &[f64]) -> Vec<f64> {
    x.iter().zip(grad_out).map(|(&v, &g)| if v > 0.0 { g } else { 0.0 }).collect()
}

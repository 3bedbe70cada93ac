//! Seed-driven augmentation: horizontal/vertical flips, mean-anchored
//! contrast scaling, and bilinear multi-scaling.
//!
//! Every draw comes from a counter-based generator keyed by
//! `(policy.seed, draw_index)`, so augmentation is a pure function of its
//! arguments and safe under parallel data loading. Geometric draws (flips,
//! scale) are shared between an image and its ground truth; photometric
//! draws (contrast) apply to the image only.

use crate::boxes::BoundingBox;
use crate::error::{Error, Result};
use crate::metrics::Mask;
use crate::volume::{bilinear_resize, SliceStack};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipAxis {
    Horizontal,
    Vertical,
}

/// The augmentation policy: flip probabilities, multiplicative contrast and
/// scale ranges, and the stream seed.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentPolicy {
    pub flip_h_prob: f64,
    pub flip_v_prob: f64,
    pub contrast_range: (f64, f64),
    pub scale_range: (f64, f64),
    pub seed: u64,
}

impl AugmentPolicy {
    /// A policy that never changes its input.
    pub fn identity() -> Self {
        AugmentPolicy {
            flip_h_prob: 0.0,
            flip_v_prob: 0.0,
            contrast_range: (1.0, 1.0),
            scale_range: (1.0, 1.0),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.flip_h_prob) || !prob(self.flip_v_prob) {
            return Err(Error::Config { reason: "flip probabilities must be in [0,1]".into() });
        }
        for (name, (lo, hi)) in [("contrast", self.contrast_range), ("scale", self.scale_range)] {
            if !(lo > 0.0) || !(hi > 0.0) || lo > hi {
                return Err(Error::Config {
                    reason: format!("{name} range ({lo}, {hi}) must be positive with lo <= hi"),
                });
            }
        }
        Ok(())
    }

    /// All random decisions for one `draw_index`, drawn in a fixed order so
    /// the mapping (seed, draw_index) -> draws never shifts.
    pub fn draws(&self, draw_index: u64) -> AugmentDraws {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, draw_index));
        let u_h: f64 = rng.gen();
        let u_v: f64 = rng.gen();
        let contrast = sample_range(&mut rng, self.contrast_range);
        let scale = sample_range(&mut rng, self.scale_range);
        AugmentDraws {
            flip_h: u_h < self.flip_h_prob,
            flip_v: u_v < self.flip_v_prob,
            contrast,
            scale,
        }
    }
}

fn sample_range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// SplitMix64 finalizer over (seed, counter); decorrelates adjacent draws.
fn mix(seed: u64, counter: u64) -> u64 {
    let mut z = seed ^ counter.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// The realized draws for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraws {
    pub flip_h: bool,
    pub flip_v: bool,
    pub contrast: f64,
    pub scale: f64,
}

/// Mirrors every channel identically: horizontal maps (r, c) to
/// (r, W-1-c), vertical maps it to (H-1-r, c).
pub fn flip(stack: &SliceStack, axis: FlipAxis) -> SliceStack {
    let (h, w) = (stack.height(), stack.width());
    let mut out = stack.clone();
    for ch in 0..stack.channels() {
        for r in 0..h {
            for c in 0..w {
                let v = match axis {
                    FlipAxis::Horizontal => stack.at(ch, r, w - 1 - c),
                    FlipAxis::Vertical => stack.at(ch, h - 1 - r, c),
                };
                out.set(ch, r, c, v);
            }
        }
    }
    out
}

/// Mean-anchored contrast: out = mean + factor * (in - mean) per channel,
/// clipped to [0, 1] when the stack is normalized. Factor 1 is the identity.
pub fn adjust_contrast(stack: &SliceStack, factor: f64) -> Result<SliceStack> {
    if !(factor > 0.0) {
        return Err(Error::NonPositiveFactor(factor));
    }
    // Factor 1 is the identity; normalized stacks are already in [0, 1]
    // so clipping cannot change them either.
    if factor == 1.0 {
        return Ok(stack.clone());
    }
    let (h, w) = (stack.height(), stack.width());
    let mut out = stack.clone();
    for ch in 0..stack.channels() {
        let mean: f64 =
            stack.channel(ch).iter().map(|&v| v as f64).sum::<f64>() / (h * w) as f64;
        for r in 0..h {
            for c in 0..w {
                let mut v = mean + factor * (stack.at(ch, r, c) as f64 - mean);
                if stack.normalized {
                    v = v.clamp(0.0, 1.0);
                }
                out.set(ch, r, c, v as f32);
            }
        }
    }
    Ok(out)
}

/// Bilinear resize of every channel to (round(H*f), round(W*f)).
pub fn rescale(stack: &SliceStack, factor: f64) -> Result<SliceStack> {
    if factor == 1.0 {
        return Ok(stack.clone());
    }
    let (h, w) = (stack.height(), stack.width());
    let nh = (h as f64 * factor).round() as i64;
    let nw = (w as f64 * factor).round() as i64;
    if nh < 1 || nw < 1 {
        return Err(Error::DegenerateOutput { h: nh, w: nw });
    }
    let (nh, nw) = (nh as usize, nw as usize);
    let mut pixels = Vec::with_capacity(stack.channels() * nh * nw);
    for ch in 0..stack.channels() {
        pixels.extend(bilinear_resize(stack.channel(ch), h, w, nh, nw));
    }
    let mut out = SliceStack::new(nh, nw, stack.tags().to_vec(), pixels, stack.provenance.clone())?;
    out.normalized = stack.normalized;
    Ok(out)
}

/// Applies the policy's draws for `draw_index` in the fixed order
/// flip-h, flip-v, contrast, scale.
pub fn apply_policy(stack: &SliceStack, policy: &AugmentPolicy, draw_index: u64) -> Result<SliceStack> {
    policy.validate()?;
    let draws = policy.draws(draw_index);
    apply_photometric(&apply_geometric_pre_scale(stack, &draws), &draws)
        .and_then(|s| apply_scale(&s, &draws))
}

fn apply_geometric_pre_scale(stack: &SliceStack, draws: &AugmentDraws) -> SliceStack {
    let mut s = stack.clone();
    if draws.flip_h {
        s = flip(&s, FlipAxis::Horizontal);
    }
    if draws.flip_v {
        s = flip(&s, FlipAxis::Vertical);
    }
    s
}

fn apply_photometric(stack: &SliceStack, draws: &AugmentDraws) -> Result<SliceStack> {
    adjust_contrast(stack, draws.contrast)
}

fn apply_scale(stack: &SliceStack, draws: &AugmentDraws) -> Result<SliceStack> {
    rescale(stack, draws.scale)
}

/// Applies the same geometric draws to an image and its label mask; the
/// photometric contrast draw touches the image only. Mask rescaling goes
/// through bilinear interpolation of the {0,1} field thresholded at 0.5.
pub fn apply_policy_pair(
    image: &SliceStack,
    mask: &Mask,
    policy: &AugmentPolicy,
    draw_index: u64,
) -> Result<(SliceStack, Mask)> {
    policy.validate()?;
    let draws = policy.draws(draw_index);
    let image_out = apply_scale(
        &apply_photometric(&apply_geometric_pre_scale(image, &draws), &draws)?,
        &draws,
    )?;

    let mut field: Vec<f32> = mask.data().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let (h, w) = (mask.h, mask.w);
    if draws.flip_h {
        let src = field.clone();
        for r in 0..h {
            for c in 0..w {
                field[r * w + c] = src[r * w + (w - 1 - c)];
            }
        }
    }
    if draws.flip_v {
        let src = field.clone();
        for r in 0..h {
            for c in 0..w {
                field[r * w + c] = src[(h - 1 - r) * w + c];
            }
        }
    }
    let (nh, nw) = (image_out.height(), image_out.width());
    let resized = if (nh, nw) == (h, w) { field } else { bilinear_resize(&field, h, w, nh, nw) };
    let mask_out = Mask::new(nh, nw, resized.into_iter().map(|v| v > 0.5).collect())?;
    Ok((image_out, mask_out))
}

/// Maps a box through the same geometric draws that [`apply_policy_pair`]
/// applies to images of the given size.
pub fn apply_to_box(
    b: &BoundingBox,
    h: usize,
    w: usize,
    draws: &AugmentDraws,
) -> BoundingBox {
    let mut out = *b;
    if draws.flip_h {
        out = BoundingBox::new(w as f64 - out.x_max, out.y_min, w as f64 - out.x_min, out.y_max);
    }
    if draws.flip_v {
        out = BoundingBox::new(out.x_min, h as f64 - out.y_max, out.x_max, h as f64 - out.y_min);
    }
    if draws.scale != 1.0 {
        let nh = (h as f64 * draws.scale).round().max(1.0);
        let nw = (w as f64 * draws.scale).round().max(1.0);
        out = BoundingBox::new(
            out.x_min * nw / w as f64,
            out.y_min * nh / h as f64,
            out.x_max * nw / w as f64,
            out.y_max * nh / h as f64,
        );
    }
    out
}

//! Pooling operators (L2-norm, max, average), ReLU, and single-level
//! spatial-pyramid ROI pooling, each with an explicit backward pass.

use super::{FeatureMap, PoolSpec, Roi};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Avg,
    L2,
}

impl PoolKind {
    pub fn name(self) -> &'static str {
        match self {
            PoolKind::Max => "max",
            PoolKind::Avg => "avg",
            PoolKind::L2 => "l2",
        }
    }

    pub fn parse(s: &str) -> Option<PoolKind> {
        match s {
            "max" => Some(PoolKind::Max),
            "avg" => Some(PoolKind::Avg),
            "l2" => Some(PoolKind::L2),
            _ => None,
        }
    }
}

/// Output dims of valid pooling: floor((H - kh) / sh) + 1 per axis.
pub fn pool_output_dims(h: usize, w: usize, spec: &PoolSpec) -> Result<(usize, usize)> {
    let (kh, kw) = spec.window;
    let (sh, sw) = spec.stride;
    if kh == 0 || kw == 0 || sh == 0 || sw == 0 {
        return Err(Error::BadConfig { reason: "zero pooling window or stride".into() });
    }
    if kh > h || kw > w {
        return Err(Error::WindowTooLarge { kh, kw, h, w });
    }
    Ok(((h - kh) / sh + 1, (w - kw) / sw + 1))
}

fn windows(h: usize, w: usize, spec: &PoolSpec) -> Result<(usize, usize)> {
    pool_output_dims(h, w, spec)
}

/// L2-norm pooling: each output cell is the Euclidean norm of its window,
/// y = sqrt(sum x_i^2), computed per channel.
pub fn l2pool_forward(x: &FeatureMap, spec: &PoolSpec) -> Result<FeatureMap> {
    let (oh, ow) = windows(x.h, x.w, spec)?;
    let (kh, kw) = spec.window;
    let (sh, sw) = spec.stride;
    let mut y = FeatureMap::zeros(x.c, oh, ow);
    for c in 0..x.c {
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = 0.0;
                for p in 0..kh {
                    for q in 0..kw {
                        let v = x.at(c, i * sh + p, j * sw + q);
                        acc += v * v;
                    }
                }
                *y.at_mut(c, i, j) = acc.sqrt();
            }
        }
    }
    Ok(y)
}

/// Backward of [`l2pool_forward`]: for a window with output y and upstream
/// gradient g, d/dx_i = g * x_i / y when y > 0 and 0 when y = 0 (the zero
/// subgradient convention). Overlapping windows accumulate.
pub fn l2pool_backward(x: &FeatureMap, spec: &PoolSpec, grad_out: &FeatureMap) -> Result<FeatureMap> {
    let (oh, ow) = windows(x.h, x.w, spec)?;
    if grad_out.shape() != (x.c, oh, ow) {
        return Err(Error::ShapeMismatch {
            reason: format!("grad_out {:?} vs expected ({}, {oh}, {ow})", grad_out.shape(), x.c),
        });
    }
    let (kh, kw) = spec.window;
    let (sh, sw) = spec.stride;
    let mut gx = FeatureMap::zeros(x.c, x.h, x.w);
    for c in 0..x.c {
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = 0.0;
                for p in 0..kh {
                    for q in 0..kw {
                        let v = x.at(c, i * sh + p, j * sw + q);
                        acc += v * v;
                    }
                }
                let y = acc.sqrt();
                if y == 0.0 {
                    continue;
                }
                let g = grad_out.at(c, i, j);
                for p in 0..kh {
                    for q in 0..kw {
                        *gx.at_mut(c, i * sh + p, j * sw + q) += g * x.at(c, i * sh + p, j * sw + q) / y;
                    }
                }
            }
        }
    }
    Ok(gx)
}

/// Max pooling; ties route to the first (row-major) maximal element.
pub fn maxpool_forward(x: &FeatureMap, spec: &PoolSpec) -> Result<FeatureMap> {
    let (oh, ow) = windows(x.h, x.w, spec)?;
    let (kh, kw) = spec.window;
    let (sh, sw) = spec.stride;
    let mut y = FeatureMap::zeros(x.c, oh, ow);
    for c in 0..x.c {
        for i in 0..oh {
            for j in 0..ow {
                let mut best = f64::NEG_INFINITY;
                for p in 0..kh {
                    for q in 0..kw {
                        best = best.max(x.at(c, i * sh + p, j * sw + q));
                    }
                }
                *y.at_mut(c, i, j) = best;
            }
        }
    }
    Ok(y)
}

pub fn maxpool_backward(x: &FeatureMap, spec: &PoolSpec, grad_out: &FeatureMap) -> Result<FeatureMap> {
    let (oh, ow) = windows(x.h, x.w, spec)?;
    if grad_out.shape() != (x.c, oh, ow) {
        return Err(Error::ShapeMismatch { reason: "maxpool grad shape".into() });
    }
    let (kh, kw) = spec.window;
    let (sh, sw) = spec.stride;
    let mut gx = FeatureMap::zeros(x.c, x.h, x.w);
    for c in 0..x.c {
        for i in 0..oh {
            for j in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut arg = (0, 0);
                for p in 0..kh {
                    for q in 0..kw {
                        let v = x.at(c, i * sh + p, j * sw + q);
                        if v > best {
                            best = v;
                            arg = (i * sh + p, j * sw + q);
                        }
                    }
                }
                *gx.at_mut(c, arg.0, arg.1) += grad_out.at(c, i, j);
            }
        }
    }
    Ok(gx)
}

/// Average pooling.
pub fn avgpool_forward(x: &FeatureMap, spec: &PoolSpec) -> Result<FeatureMap> {
    let (oh, ow) = windows(x.h, x.w, spec)?;
    let (kh, kw) = spec.window;
    let (sh, sw) = spec.stride;
    let inv = 1.0 / (kh * kw) as f64;
    let mut y = FeatureMap::zeros(x.c, oh, ow);
    for c in 0..x.c {
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = 0.0;
                for p in 0..kh {
                    for q in 0..kw {
                        acc += x.at(c, i * sh + p, j * sw + q);
                    }
                }
                *y.at_mut(c, i, j) = acc * inv;
            }
        }
    }
    Ok(y)
}

pub fn avgpool_backward(x: &FeatureMap, spec: &PoolSpec, grad_out: &FeatureMap) -> Result<FeatureMap> {
    let (oh, ow) = windows(x.h, x.w, spec)?;
    if grad_out.shape() != (x.c, oh, ow) {
        return Err(Error::ShapeMismatch { reason: "avgpool grad shape".into() });
    }
    let (kh, kw) = spec.window;
    let (sh, sw) = spec.stride;
    let inv = 1.0 / (kh * kw) as f64;
    let mut gx = FeatureMap::zeros(x.c, x.h, x.w);
    for c in 0..x.c {
        for i in 0..oh {
            for j in 0..ow {
                let g = grad_out.at(c, i, j) * inv;
                for p in 0..kh {
                    for q in 0..kw {
                        *gx.at_mut(c, i * sh + p, j * sw + q) += g;
                    }
                }
            }
        }
    }
    Ok(gx)
}

pub fn pool_forward(kind: PoolKind, x: &FeatureMap, spec: &PoolSpec) -> Result<FeatureMap> {
    match kind {
        PoolKind::Max => maxpool_forward(x, spec),
        PoolKind::Avg => avgpool_forward(x, spec),
        PoolKind::L2 => l2pool_forward(x, spec),
    }
}

pub fn relu(x: &FeatureMap) -> FeatureMap {
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    y
}

pub fn relu_backward(x: &FeatureMap, grad_out: &FeatureMap) -> FeatureMap {
    let mut gx = grad_out.clone();
    for (g, &v) in gx.data_mut().iter_mut().zip(x.data()) {
        if v <= 0.0 {
            *g = 0.0;
        }
    }
    gx
}

/// Snaps an ROI's continuous coordinates to whole cells by rounding and
/// checks it against the map. Returns (x0, y0, width, height) in cells.
fn snap_roi(x: &FeatureMap, roi: &Roi) -> Result<(usize, usize, usize, usize)> {
    let x0 = roi.x_min.round();
    let y0 = roi.y_min.round();
    let x1 = roi.x_max.round();
    let y1 = roi.y_max.round();
    if x0 < 0.0 || y0 < 0.0 || x1 > x.w as f64 || y1 > x.h as f64 || x0 >= x1 || y0 >= y1 {
        return Err(Error::RoiOutOfBounds {
            reason: format!(
                "roi ({}, {}, {}, {}) on {}x{} map",
                roi.x_min, roi.y_min, roi.x_max, roi.y_max, x.w, x.h
            ),
        });
    }
    let (x0, y0) = (x0 as usize, y0 as usize);
    let (lw, lh) = (x1 as usize - x0, y1 as usize - y0);
    let (ph, pw) = roi.output_size;
    if lh < ph || lw < pw {
        return Err(Error::RoiTooSmall { got_h: lh, got_w: lw, need_h: ph, need_w: pw });
    }
    Ok((x0, y0, lw, lh))
}

/// Single-level spatial-pyramid pooling over an ROI: the snapped region is
/// split into a ph x pw grid of near-equal bins (bin b spans
/// [floor(b*L/n), floor((b+1)*L/n))) and each bin is max-pooled per channel.
pub fn roi_spp_pool(x: &FeatureMap, roi: &Roi) -> Result<FeatureMap> {
    let (x0, y0, lw, lh) = snap_roi(x, roi)?;
    let (ph, pw) = roi.output_size;
    let mut y = FeatureMap::zeros(x.c, ph, pw);
    for c in 0..x.c {
        for bi in 0..ph {
            let r0 = y0 + bi * lh / ph;
            let r1 = y0 + (bi + 1) * lh / ph;
            for bj in 0..pw {
                let c0 = x0 + bj * lw / pw;
                let c1 = x0 + (bj + 1) * lw / pw;
                let mut best = f64::NEG_INFINITY;
                for r in r0..r1 {
                    for col in c0..c1 {
                        best = best.max(x.at(c, r, col));
                    }
                }
                *y.at_mut(c, bi, bj) = best;
            }
        }
    }
    Ok(y)
}

/// Routes pooled gradients back to each bin's first maximal cell,
/// accumulating into `grad_in`.
pub fn roi_spp_backward(
    x: &FeatureMap,
    roi: &Roi,
    grad_out: &FeatureMap,
    grad_in: &mut FeatureMap,
) -> Result<()> {
    let (x0, y0, lw, lh) = snap_roi(x, roi)?;
    let (ph, pw) = roi.output_size;
    if grad_out.shape() != (x.c, ph, pw) {
        return Err(Error::ShapeMismatch { reason: "roi pool grad shape".into() });
    }
    for c in 0..x.c {
        for bi in 0..ph {
            let r0 = y0 + bi * lh / ph;
            let r1 = y0 + (bi + 1) * lh / ph;
            for bj in 0..pw {
                let c0 = x0 + bj * lw / pw;
                let c1 = x0 + (bj + 1) * lw / pw;
                let mut best = f64::NEG_INFINITY;
                let mut arg = (r0, c0);
                for r in r0..r1 {
                    for col in c0..c1 {
                        let v = x.at(c, r, col);
                        if v > best {
                            best = v;
                            arg = (r, col);
                        }
                    }
                }
                *grad_in.at_mut(c, arg.0, arg.1) += grad_out.at(c, bi, bj);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(c: usize, h: usize, w: usize, seed: u64) -> FeatureMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        FeatureMap::from_vec(c, h, w, data).unwrap()
    }

    #[test]
    fn l2pool_three_four_five() {
        let x = FeatureMap::from_vec(1, 1, 2, vec![3.0, 4.0]).unwrap();
        let y = l2pool_forward(&x, &PoolSpec { window: (1, 2), stride: (1, 1) }).unwrap();
        assert_relative_eq!(y.at(0, 0, 0), 5.0, epsilon = 1e-12);

        let zero = FeatureMap::zeros(1, 2, 2);
        let y = l2pool_forward(&zero, &PoolSpec::square(2, 1)).unwrap();
        assert_eq!(y.at(0, 0, 0), 0.0);
    }

    #[test]
    fn l2pool_matches_brute_force() {
        let x = random_map(1, 6, 6, 42);
        let spec = PoolSpec::square(2, 2);
        let y = l2pool_forward(&x, &spec).unwrap();
        assert_eq!(y.shape(), (1, 3, 3));
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for p in 0..2 {
                    for q in 0..2 {
                        let v = x.at(0, 2 * i + p, 2 * j + q);
                        acc += v * v;
                    }
                }
                assert_relative_eq!(y.at(0, i, j), acc.sqrt(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn l2pool_backward_hand_case() {
        let x = FeatureMap::from_vec(1, 1, 2, vec![3.0, 4.0]).unwrap();
        let spec = PoolSpec { window: (1, 2), stride: (1, 1) };
        let g = FeatureMap::from_vec(1, 1, 1, vec![1.0]).unwrap();
        let gx = l2pool_backward(&x, &spec, &g).unwrap();
        assert_relative_eq!(gx.at(0, 0, 0), 0.6, epsilon = 1e-12);
        assert_relative_eq!(gx.at(0, 0, 1), 0.8, epsilon = 1e-12);

        let zero = FeatureMap::zeros(1, 1, 2);
        let gx = l2pool_backward(&zero, &spec, &g).unwrap();
        assert_eq!(gx.data(), &[0.0, 0.0]);
    }

    #[test]
    fn l2pool_window_too_large() {
        let x = FeatureMap::zeros(1, 2, 2);
        assert!(matches!(
            l2pool_forward(&x, &PoolSpec::square(3, 1)),
            Err(Error::WindowTooLarge { .. })
        ));
    }

    #[test]
    fn l2pool_unit_window_is_abs() {
        let x = random_map(2, 4, 4, 7);
        let y = l2pool_forward(&x, &PoolSpec::square(1, 1)).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert_eq!(*a, b.abs());
        }
    }

    #[test]
    fn roi_pool_ramp_case() {
        // 4x4 ramp 0..15, full-map roi, 2x2 output -> [[5,7],[13,15]]
        let x = FeatureMap::from_vec(1, 4, 4, (0..16).map(|v| v as f64).collect()).unwrap();
        let roi = Roi { x_min: 0.0, y_min: 0.0, x_max: 4.0, y_max: 4.0, output_size: (2, 2) };
        let y = roi_spp_pool(&x, &roi).unwrap();
        assert_eq!(y.data(), &[5.0, 7.0, 13.0, 15.0]);
    }

    #[test]
    fn roi_pool_global_max() {
        let x = random_map(3, 5, 7, 3);
        let roi = Roi { x_min: 0.0, y_min: 0.0, x_max: 7.0, y_max: 5.0, output_size: (1, 1) };
        let y = roi_spp_pool(&x, &roi).unwrap();
        for c in 0..3 {
            let m = x.channel(c).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(y.at(c, 0, 0), m);
        }
    }

    #[test]
    fn roi_pool_too_small_and_out_of_bounds() {
        let x = FeatureMap::zeros(1, 4, 4);
        let tiny = Roi { x_min: 1.0, y_min: 1.0, x_max: 2.0, y_max: 2.0, output_size: (2, 2) };
        assert!(matches!(roi_spp_pool(&x, &tiny), Err(Error::RoiTooSmall { .. })));
        let outside = Roi { x_min: 1.0, y_min: 1.0, x_max: 5.0, y_max: 4.0, output_size: (1, 1) };
        assert!(matches!(roi_spp_pool(&x, &outside), Err(Error::RoiOutOfBounds { .. })));
    }

    #[test]
    fn roi_pool_reproduces_plain_maxpool() {
        // Full-map ROI with output size equal to the post-pool grid of a
        // non-overlapping max pool reproduces that pool exactly.
        let x = random_map(2, 6, 8, 9);
        let plain = maxpool_forward(&x, &PoolSpec::square(2, 2)).unwrap();
        let roi = Roi { x_min: 0.0, y_min: 0.0, x_max: 8.0, y_max: 6.0, output_size: (3, 4) };
        let pooled = roi_spp_pool(&x, &roi).unwrap();
        assert_eq!(pooled, plain);
    }

    #[test]
    fn maxpool_and_avgpool_brute_force() {
        let x = random_map(2, 5, 5, 21);
        let spec = PoolSpec::square(3, 2);
        let my = maxpool_forward(&x, &spec).unwrap();
        let ay = avgpool_forward(&x, &spec).unwrap();
        assert_eq!(my.shape(), (2, 2, 2));
        for c in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut best = f64::NEG_INFINITY;
                    let mut sum = 0.0;
                    for p in 0..3 {
                        for q in 0..3 {
                            let v = x.at(c, 2 * i + p, 2 * j + q);
                            best = best.max(v);
                            sum += v;
                        }
                    }
                    assert_eq!(my.at(c, i, j), best);
                    assert_relative_eq!(ay.at(c, i, j), sum / 9.0, epsilon = 1e-12);
                }
            }
        }
    }
}

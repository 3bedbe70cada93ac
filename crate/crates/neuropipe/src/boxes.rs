//! Axis-aligned bounding boxes, the delta parameterization used by both
//! box-regression heads, and non-maximum suppression.

use crate::metrics::iou;

/// Continuous pixel-coordinate box, min corner inclusive, max exclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        BoundingBox { x_min, y_min, x_max, y_max }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BoundingBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn is_valid(&self) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max
    }

    /// Clips to an image of `w` x `h` pixels.
    pub fn clipped(&self, w: usize, h: usize) -> BoundingBox {
        BoundingBox {
            x_min: self.x_min.clamp(0.0, w as f64),
            y_min: self.y_min.clamp(0.0, h as f64),
            x_max: self.x_max.clamp(0.0, w as f64),
            y_max: self.y_max.clamp(0.0, h as f64),
        }
    }

    /// Scales all coordinates by a factor (feature-map <-> image mapping).
    pub fn scaled(&self, f: f64) -> BoundingBox {
        BoundingBox::new(self.x_min * f, self.y_min * f, self.x_max * f, self.y_max * f)
    }
}

/// Box regression target: (dx, dy) normalized center shift plus log-scale
/// size ratios, relative to an anchor.
pub fn encode_deltas(target: &BoundingBox, anchor: &BoundingBox) -> [f64; 4] {
    let (tcx, tcy) = target.center();
    let (acx, acy) = anchor.center();
    let (tw, th) = (target.width(), target.height());
    let (aw, ah) = (anchor.width(), anchor.height());
    [
        (tcx - acx) / aw,
        (tcy - acy) / ah,
        (tw / aw).ln(),
        (th / ah).ln(),
    ]
}

/// Inverse of [`encode_deltas`].
pub fn decode_deltas(anchor: &BoundingBox, deltas: &[f64; 4]) -> BoundingBox {
    let (acx, acy) = anchor.center();
    let (aw, ah) = (anchor.width(), anchor.height());
    let cx = acx + deltas[0] * aw;
    let cy = acy + deltas[1] * ah;
    let w = aw * deltas[2].exp();
    let h = ah * deltas[3].exp();
    BoundingBox::from_center(cx, cy, w, h)
}

/// Greedy non-maximum suppression. Candidates are ordered by descending
/// score with box coordinates as a total tie-break, so the result does not
/// depend on input order.
pub fn nms(scored: &[(BoundingBox, f64)], iou_threshold: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| {
        let (ba, sa) = &scored[a];
        let (bb, sb) = &scored[b];
        sb.partial_cmp(sa)
            .unwrap()
            .then(ba.x_min.partial_cmp(&bb.x_min).unwrap())
            .then(ba.y_min.partial_cmp(&bb.y_min).unwrap())
            .then(ba.x_max.partial_cmp(&bb.x_max).unwrap())
            .then(ba.y_max.partial_cmp(&bb.y_max).unwrap())
    });
    let mut kept: Vec<usize> = Vec::new();
    for idx in order {
        let candidate = &scored[idx].0;
        if kept.iter().all(|&k| iou(&scored[k].0, candidate) < iou_threshold) {
            kept.push(idx);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn delta_identity() {
        let b = BoundingBox::new(3.0, 4.0, 10.0, 12.0);
        let d = encode_deltas(&b, &b);
        for v in d {
            assert_relative_eq!(v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn delta_round_trip() {
        let anchor = BoundingBox::new(2.0, 2.0, 18.0, 10.0);
        let target = BoundingBox::new(5.5, 1.0, 25.0, 14.5);
        let back = decode_deltas(&anchor, &encode_deltas(&target, &anchor));
        assert_relative_eq!(back.x_min, target.x_min, epsilon = 1e-9);
        assert_relative_eq!(back.y_min, target.y_min, epsilon = 1e-9);
        assert_relative_eq!(back.x_max, target.x_max, epsilon = 1e-9);
        assert_relative_eq!(back.y_max, target.y_max, epsilon = 1e-9);
    }

    #[test]
    fn nms_keeps_highest_of_identical_pair() {
        let b = BoundingBox::new(0.0, 0.0, 4.0, 4.0);
        let kept = nms(&[(b, 0.8), (b, 0.9)], 0.5);
        assert_eq!(kept, vec![1]);
    }

    #[test]
    fn nms_order_invariant() {
        let boxes = [
            (BoundingBox::new(0.0, 0.0, 4.0, 4.0), 0.9),
            (BoundingBox::new(1.0, 1.0, 5.0, 5.0), 0.7),
            (BoundingBox::new(10.0, 10.0, 14.0, 14.0), 0.8),
        ];
        let kept_fwd: Vec<BoundingBox> =
            nms(&boxes, 0.5).into_iter().map(|i| boxes[i].0).collect();
        let rev: Vec<_> = boxes.iter().rev().copied().collect();
        let mut kept_rev: Vec<BoundingBox> =
            nms(&rev, 0.5).into_iter().map(|i| rev[i].0).collect();
        kept_rev.sort_by(|a, b| a.x_min.partial_cmp(&b.x_min).unwrap());
        let mut kept_fwd_sorted = kept_fwd.clone();
        kept_fwd_sorted.sort_by(|a, b| a.x_min.partial_cmp(&b.x_min).unwrap());
        assert_eq!(kept_fwd_sorted, kept_rev);
    }

    #[test]
    fn nms_pairwise_iou_below_threshold() {
        let boxes: Vec<(BoundingBox, f64)> = (0..10)
            .map(|i| {
                let o = i as f64 * 1.5;
                (BoundingBox::new(o, o, o + 6.0, o + 6.0), 1.0 - i as f64 * 0.05)
            })
            .collect();
        let kept = nms(&boxes, 0.5);
        for (a, &ka) in kept.iter().enumerate() {
            for &kb in &kept[a + 1..] {
                assert!(crate::metrics::iou(&boxes[ka].0, &boxes[kb].0) < 0.5);
            }
        }
    }
}

//! Evaluation metrics: Dice, IoU, confusion counts, and per-class reports.
//! All counting is exact integer arithmetic until the final division.

use crate::boxes::BoundingBox;
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// A binary 2D mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub h: usize,
    pub w: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(h: usize, w: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::ShapeMismatch {
                reason: format!("{h}x{w} mask needs {} entries, got {}", h * w, data.len()),
            });
        }
        Ok(Mask { h, w, data })
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Mask { h, w, data: vec![false; h * w] }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.w + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.data[r * self.w + c] = v;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Tight bounding box of the positive pixels, or None when empty.
    pub fn tight_box(&self) -> Option<BoundingBox> {
        let mut r0 = usize::MAX;
        let mut r1 = 0usize;
        let mut c0 = usize::MAX;
        let mut c1 = 0usize;
        let mut any = false;
        for r in 0..self.h {
            for c in 0..self.w {
                if self.get(r, c) {
                    any = true;
                    r0 = r0.min(r);
                    r1 = r1.max(r);
                    c0 = c0.min(c);
                    c1 = c1.max(c);
                }
            }
        }
        any.then(|| BoundingBox::new(c0 as f64, r0 as f64, (c1 + 1) as f64, (r1 + 1) as f64))
    }
}

/// Dice similarity coefficient 2|A∩B| / (|A| + |B|); 1.0 when both masks
/// are empty.
pub fn dice(a: &Mask, b: &Mask) -> Result<f64> {
    if a.h != b.h || a.w != b.w {
        return Err(Error::ShapeMismatch {
            reason: format!("dice on {}x{} vs {}x{}", a.h, a.w, b.h, b.w),
        });
    }
    Ok(dice_flat(&a.data, &b.data))
}

/// Dice over two equally sized flat binary buffers (used for 3D masks).
pub fn dice_flat(a: &[bool], b: &[bool]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut inter: u64 = 0;
    let mut total: u64 = 0;
    for (&x, &y) in a.iter().zip(b) {
        inter += (x && y) as u64;
        total += x as u64 + y as u64;
    }
    if total == 0 {
        1.0
    } else {
        2.0 * inter as f64 / total as f64
    }
}

/// Intersection over union of two boxes; 0 when disjoint.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// One-vs-rest confusion counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Counts one-vs-rest outcomes for the chosen positive key.
pub fn confusion<T: PartialEq>(pred: &[T], truth: &[T], positive: &T) -> Result<ConfusionCounts> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    let mut c = ConfusionCounts::default();
    for (p, t) in pred.iter().zip(truth) {
        match (p == positive, t == positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Per-key metric values, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub dice: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
}

/// Per-class (or per-sub-region) metrics plus their macro average.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<(String, MetricRow)>,
    pub macro_avg: MetricRow,
}

/// Ratio with the stated empty-population convention: when the denominator
/// population is empty the metric is 1.0 (a correct "nothing there" call).
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Summarizes confusion counts into a metrics report.
pub fn summarize(counts: &[(String, ConfusionCounts)]) -> Result<MetricsReport> {
    if counts.is_empty() {
        return Err(Error::UndefinedMetric { reason: "no keys to summarize".into() });
    }
    let mut rows = Vec::with_capacity(counts.len());
    for (key, c) in counts {
        if c.total() == 0 {
            return Err(Error::UndefinedMetric { reason: format!("key {key} has no samples") });
        }
        rows.push((
            key.clone(),
            MetricRow {
                dice: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
                sensitivity: ratio(c.tp, c.tp + c.fn_),
                specificity: ratio(c.tn, c.tn + c.fp),
                accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
            },
        ));
    }
    let n = rows.len() as f64;
    let macro_avg = MetricRow {
        dice: rows.iter().map(|(_, r)| r.dice).sum::<f64>() / n,
        sensitivity: rows.iter().map(|(_, r)| r.sensitivity).sum::<f64>() / n,
        specificity: rows.iter().map(|(_, r)| r.specificity).sum::<f64>() / n,
        accuracy: rows.iter().map(|(_, r)| r.accuracy).sum::<f64>() / n,
    };
    Ok(MetricsReport { rows, macro_avg })
}

impl MetricsReport {
    /// Renders the report as delimiter-separated text, one row per key plus
    /// a macro-average row.
    pub fn to_text(&self) -> String {
        let mut out = String::from("key,dice,sensitivity,specificity,accuracy\n");
        for (key, r) in &self.rows {
            let _ = writeln!(
                out,
                "{key},{},{},{},{}",
                r.dice, r.sensitivity, r.specificity, r.accuracy
            );
        }
        let m = &self.macro_avg;
        let _ = writeln!(out, "macro,{},{},{},{}", m.dice, m.sensitivity, m.specificity, m.accuracy);
        out
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_text())?;
        Ok(())
    }
}

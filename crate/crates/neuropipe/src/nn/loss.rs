//! Loss functions, each returning (loss, gradient w.r.t. the inputs).

use crate::error::{Error, Result};

/// Multiclass margin loss: sum over j != label of
/// max(0, margin + s_j - s_label). Subgradient at exact ties resolves to 0.
pub fn multiclass_hinge_loss(scores: &[f64], label: usize, margin: f64) -> Result<(f64, Vec<f64>)> {
    if label >= scores.len() {
        return Err(Error::BadLabel { label, classes: scores.len() });
    }
    debug_assert!(margin > 0.0, "margin must be positive");
    let s_y = scores[label];
    let mut loss = 0.0;
    let mut grad = vec![0.0; scores.len()];
    let mut violations = 0.0;
    for (j, &s) in scores.iter().enumerate() {
        if j == label {
            continue;
        }
        let m = margin + s - s_y;
        if m > 0.0 {
            loss += m;
            grad[j] = 1.0;
            violations += 1.0;
        }
    }
    grad[label] = -violations;
    Ok((loss, grad))
}

/// Log-sum-exp-stable softmax cross entropy; gradient is
/// softmax(scores) - onehot(label).
pub fn softmax_ce(scores: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= scores.len() {
        return Err(Error::BadLabel { label, classes: scores.len() });
    }
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = scores.iter().map(|&s| (s - m).exp()).sum();
    let log_sum = m + sum_exp.ln();
    let loss = log_sum - scores[label];
    let mut grad: Vec<f64> = scores.iter().map(|&s| (s - m).exp() / sum_exp).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Elementwise Huber-style box loss: f(u) = u^2/2 for |u| < 1, |u| - 1/2
/// otherwise, summed over the four coordinates.
pub fn smooth_l1(pred: &[f64; 4], target: &[f64; 4]) -> (f64, [f64; 4]) {
    let mut loss = 0.0;
    let mut grad = [0.0; 4];
    for d in 0..4 {
        let u = pred[d] - target[d];
        if u.abs() < 1.0 {
            loss += 0.5 * u * u;
            grad[d] = u;
        } else {
            loss += u.abs() - 0.5;
            grad[d] = u.signum();
        }
    }
    (loss, grad)
}

/// Weighted multi-task objective w1*cls + w2*reg + w3*mask; a missing mask
/// term contributes zero.
pub fn multitask_loss(cls: f64, reg: f64, mask: Option<f64>, weights: [f64; 3]) -> Result<f64> {
    for &w in &weights {
        if w < 0.0 {
            return Err(Error::NegativeWeight(w));
        }
    }
    Ok(weights[0] * cls + weights[1] * reg + weights[2] * mask.unwrap_or(0.0))
}

/// Numerically stable per-element binary cross entropy on logits:
/// l = max(z, 0) - z*t + ln(1 + exp(-|z|)); gradient sigmoid(z) - t.
/// Returns the mean over all elements.
pub fn bce_with_logits(logits: &[f64], targets: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(logits.len(), targets.len());
    let n = logits.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &t) in logits.iter().zip(targets) {
        loss += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
        let sig = 1.0 / (1.0 + (-z).exp());
        grad.push((sig - t) / n);
    }
    (loss / n, grad)
}

//! Five-category brain-MRI classifier: seven valid (unpadded) 3x3-style
//! convolutions with average pooling after conv3 and max pooling after
//! conv5 and conv6, three fully-connected layers, dropout regularization
//! after the last one, and a 5-way margin (or softmax) head over the three
//! anatomical plane channels.

use crate::augment::{apply_policy, AugmentPolicy};
use crate::error::{Error, Result};
use crate::history::{HistoryRow, TrainHistory, TrainSettings};
use crate::nn::{
    avgpool_backward, avgpool_forward, maxpool_backward, maxpool_forward, multiclass_hinge_loss,
    relu, relu_backward, softmax_ce, Conv2d, Dropout, FeatureMap, Linear, Param, PoolSpec, Sgd,
};
use crate::volume::{bilinear_resize, ChannelTag, Plane, SliceStack};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;

/// The five diagnostic categories, in fixed ordinal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LesionClass {
    Healthy,
    TumorHgg,
    TumorLgg,
    Alzheimer,
    MultipleSclerosis,
}

impl LesionClass {
    pub const ALL: [LesionClass; 5] = [
        LesionClass::Healthy,
        LesionClass::TumorHgg,
        LesionClass::TumorLgg,
        LesionClass::Alzheimer,
        LesionClass::MultipleSclerosis,
    ];

    pub fn ordinal(self) -> usize {
        Self::ALL.iter().position(|c| *c == self).unwrap()
    }

    pub fn from_ordinal(i: usize) -> Option<LesionClass> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            LesionClass::Healthy => "Healthy",
            LesionClass::TumorHgg => "TumorHGG",
            LesionClass::TumorLgg => "TumorLGG",
            LesionClass::Alzheimer => "Alzheimer",
            LesionClass::MultipleSclerosis => "MultipleSclerosis",
        }
    }

    pub fn parse(s: &str) -> Option<LesionClass> {
        Self::ALL.iter().copied().find(|c| c.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for LesionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const NUM_CLASSES: usize = 5;

/// Pool placements are fixed: average after conv 3, max after conv 5 and 6
/// (1-based), all 2x2 stride 2.
const POOL: PoolSpec = PoolSpec { window: (2, 2), stride: (2, 2) };
const AVG_POOL_AFTER: usize = 2; // zero-based conv index
const MAX_POOL_AFTER: [usize; 2] = [4, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    Margin,
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    /// Input side S; the forward contract is (3, S, S) -> 5 scores.
    pub input_side: usize,
    pub conv_channels: [usize; 7],
    pub conv_kernels: [usize; 7],
    pub fc_width: usize,
    pub dropout_rate: f64,
    pub weight_decay: f64,
    pub head: HeadKind,
    pub margin: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            input_side: 256,
            conv_channels: [64, 128, 256, 256, 512, 512, 512],
            conv_kernels: [3; 7],
            fc_width: 4096,
            dropout_rate: 0.5,
            weight_decay: 0.0,
            head: HeadKind::Margin,
            margin: 1.0,
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    /// Documented desk-scale reference config: same layer schedule as the
    /// default, narrow widths, used by the value-level tests.
    pub fn reference() -> Self {
        ClassifierConfig {
            input_side: 256,
            conv_channels: [8, 12, 16, 16, 24, 24, 32],
            conv_kernels: [3; 7],
            fc_width: 256,
            ..Default::default()
        }
    }

    /// Tiny config for gradient checking: 2 channels per layer at S = 32;
    /// 1x1 kernels from conv4 on keep the spatial grid alive.
    pub fn tiny() -> Self {
        ClassifierConfig {
            input_side: 32,
            conv_channels: [2; 7],
            conv_kernels: [3, 3, 3, 1, 1, 1, 1],
            fc_width: 8,
            dropout_rate: 0.0,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_side < 32 {
            return Err(Error::BadConfig {
                reason: format!("input_side {} below the minimum 32", self.input_side),
            });
        }
        if self.conv_channels.iter().any(|&c| c == 0)
            || self.conv_kernels.iter().any(|&k| k == 0)
            || self.fc_width == 0
        {
            return Err(Error::BadConfig { reason: "zero width or kernel".into() });
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::BadConfig { reason: "dropout rate outside [0,1)".into() });
        }
        if self.margin <= 0.0 {
            return Err(Error::BadConfig { reason: "margin must be positive".into() });
        }
        Ok(())
    }

    /// Walks the layer schedule and returns the post-conv7 feature shape,
    /// or BadConfig when the spatial size collapses on the way.
    pub fn feature_shape(&self) -> Result<(usize, usize, usize)> {
        self.validate()?;
        let mut h = self.input_side;
        for (l, &k) in self.conv_kernels.iter().enumerate() {
            if h < k {
                return Err(Error::BadConfig {
                    reason: format!("spatial size {h} collapses at conv{} (kernel {k})", l + 1),
                });
            }
            h = h - k + 1;
            if l == AVG_POOL_AFTER || MAX_POOL_AFTER.contains(&l) {
                if h < 2 {
                    return Err(Error::BadConfig {
                        reason: format!("spatial size {h} collapses at the pool after conv{}", l + 1),
                    });
                }
                h = (h - 2) / 2 + 1;
            }
        }
        Ok((self.conv_channels[6], h, h))
    }

    /// Closed-form parameter count from the layer arithmetic; never
    /// allocates the model.
    pub fn param_count(&self) -> Result<u64> {
        let (c7, h7, w7) = self.feature_shape()?;
        let mut total: u64 = 0;
        let mut in_ch = 3usize;
        for l in 0..7 {
            let out = self.conv_channels[l];
            let k = self.conv_kernels[l];
            total += (out * in_ch * k * k + out) as u64;
            in_ch = out;
        }
        let flat = (c7 * h7 * w7) as u64;
        let fcw = self.fc_width as u64;
        total += flat * fcw + fcw; // fc1
        total += fcw * fcw + fcw; // fc2
        total += fcw * fcw + fcw; // fc3
        total += fcw * NUM_CLASSES as u64 + NUM_CLASSES as u64; // head
        Ok(total)
    }
}

/// The built classifier. Evaluation takes `&self` and is deterministic;
/// training mutates parameters and the dropout stream.
#[derive(Debug, Clone)]
pub struct ClassifierModel {
    pub cfg: ClassifierConfig,
    convs: Vec<Conv2d>,
    fcs: Vec<Linear>,
    head: Linear,
    dropout: Dropout,
    dropout_rng: ChaCha8Rng,
}

/// Per-forward activation cache consumed by the backward pass.
pub struct ClassifierCache {
    conv_in: Vec<FeatureMap>,
    conv_z: Vec<FeatureMap>,
    pool_in: Vec<FeatureMap>,
    flat: Vec<f64>,
    fc_in: Vec<Vec<f64>>,
    fc_z: Vec<Vec<f64>>,
    head_in: Vec<f64>,
    dropout_mask: Option<Vec<bool>>,
}

pub fn build_classifier(cfg: &ClassifierConfig) -> Result<ClassifierModel> {
    let (_, h7, _) = cfg.feature_shape()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut convs = Vec::with_capacity(7);
    let mut in_ch = 3;
    for l in 0..7 {
        convs.push(Conv2d::new(in_ch, cfg.conv_channels[l], cfg.conv_kernels[l], 1, 0, &mut rng));
        in_ch = cfg.conv_channels[l];
    }
    let flat = cfg.conv_channels[6] * h7 * h7;
    let fcs = vec![
        Linear::new(flat, cfg.fc_width, &mut rng),
        Linear::new(cfg.fc_width, cfg.fc_width, &mut rng),
        Linear::new(cfg.fc_width, cfg.fc_width, &mut rng),
    ];
    let head = Linear::new(cfg.fc_width, NUM_CLASSES, &mut rng);
    Ok(ClassifierModel {
        cfg: cfg.clone(),
        convs,
        fcs,
        head,
        dropout: Dropout::new(cfg.dropout_rate),
        dropout_rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6470_726f_706f_7574),
    })
}

impl ClassifierModel {
    fn check_input(&self, input: &SliceStack) -> Result<()> {
        let want: Vec<ChannelTag> = Plane::ALL.iter().map(|p| ChannelTag::Plane(*p)).collect();
        if input.tags() != want.as_slice() {
            return Err(Error::WrongChannels {
                reason: format!(
                    "expected (axial, coronal, sagittal) plane channels, got {:?}",
                    input.tags()
                ),
            });
        }
        let s = self.cfg.input_side;
        if input.height() != s || input.width() != s {
            return Err(Error::WrongSize { expected: s, h: input.height(), w: input.width() });
        }
        Ok(())
    }

    /// Deterministic eval-mode forward: (3, S, S) -> 5 scores.
    pub fn forward(&self, input: &SliceStack) -> Result<[f64; NUM_CLASSES]> {
        self.check_input(input)?;
        let x = FeatureMap::from_stack(input);
        Ok(self.forward_map(&x, None).0)
    }

    /// Forward on a raw feature map. With `rng` the dropout layer is live
    /// (training mode); without it the pass is deterministic.
    pub fn forward_map(
        &self,
        input: &FeatureMap,
        rng: Option<&mut ChaCha8Rng>,
    ) -> ([f64; NUM_CLASSES], ClassifierCache) {
        let mut cache = ClassifierCache {
            conv_in: Vec::with_capacity(7),
            conv_z: Vec::with_capacity(7),
            pool_in: Vec::with_capacity(3),
            flat: Vec::new(),
            fc_in: Vec::with_capacity(3),
            fc_z: Vec::with_capacity(3),
            head_in: Vec::new(),
            dropout_mask: None,
        };
        let mut x = input.clone();
        for l in 0..7 {
            cache.conv_in.push(x.clone());
            let z = self.convs[l].forward(&x);
            x = relu(&z);
            cache.conv_z.push(z);
            if l == AVG_POOL_AFTER {
                cache.pool_in.push(x.clone());
                x = avgpool_forward(&x, &POOL).expect("pool fits by construction");
            } else if MAX_POOL_AFTER.contains(&l) {
                cache.pool_in.push(x.clone());
                x = maxpool_forward(&x, &POOL).expect("pool fits by construction");
            }
        }
        let mut v: Vec<f64> = x.data().to_vec();
        cache.flat = v.clone();
        for f in 0..3 {
            cache.fc_in.push(v.clone());
            let z = self.fcs[f].forward(&v);
            cache.fc_z.push(z.clone());
            v = z.into_iter().map(|t| t.max(0.0)).collect();
        }
        if let Some(rng) = rng {
            let (dropped, mask) = self.dropout.forward_train(&v, rng);
            v = dropped;
            cache.dropout_mask = Some(mask);
        }
        cache.head_in = v.clone();
        let scores_vec = self.head.forward(&v);
        let mut scores = [0.0; NUM_CLASSES];
        scores.copy_from_slice(&scores_vec);
        (scores, cache)
    }

    /// Backward from score gradients; accumulates parameter gradients and
    /// returns the gradient w.r.t. the input map.
    pub fn backward(&mut self, cache: &ClassifierCache, dscores: &[f64; NUM_CLASSES]) -> FeatureMap {
        let mut g = self.head.backward(&cache.head_in, dscores);
        if let Some(mask) = &cache.dropout_mask {
            g = self.dropout.backward(&g, mask);
        }
        for f in (0..3).rev() {
            let gz = relu_vec_grad(&cache.fc_z[f], &g);
            g = self.fcs[f].backward(&cache.fc_in[f], &gz);
        }
        let (c7, h7, w7) = cache.conv_z[6].shape();
        let mut gmap = FeatureMap::from_vec(c7, h7, w7, g).expect("flat size matches conv7 output");
        let mut pool_idx = cache.pool_in.len();
        for l in (0..7).rev() {
            if l == AVG_POOL_AFTER {
                pool_idx -= 1;
                gmap = avgpool_backward(&cache.pool_in[pool_idx], &POOL, &gmap).unwrap();
            } else if MAX_POOL_AFTER.contains(&l) {
                pool_idx -= 1;
                gmap = maxpool_backward(&cache.pool_in[pool_idx], &POOL, &gmap).unwrap();
            }
            gmap = relu_backward(&cache.conv_z[l], &gmap);
            gmap = self.convs[l].backward(&cache.conv_in[l], &gmap);
        }
        gmap
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        for c in &mut self.convs {
            c.visit_params(f);
        }
        for l in &mut self.fcs {
            l.visit_params(f);
        }
        self.head.visit_params(f);
    }

    /// Named parameter blobs for checkpointing.
    pub fn named_params(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            out.push((format!("conv{}.weight", i + 1), c.weight.v.clone()));
            out.push((format!("conv{}.bias", i + 1), c.bias.v.clone()));
        }
        for (i, l) in self.fcs.iter().enumerate() {
            out.push((format!("fc{}.weight", i + 1), l.weight.v.clone()));
            out.push((format!("fc{}.bias", i + 1), l.bias.v.clone()));
        }
        out.push(("head.weight".into(), self.head.weight.v.clone()));
        out.push(("head.bias".into(), self.head.bias.v.clone()));
        out
    }

    pub fn load_named_params(&mut self, params: &[(String, Vec<f64>)]) -> Result<()> {
        let mut slots: Vec<(String, &mut Vec<f64>)> = Vec::new();
        for (i, c) in self.convs.iter_mut().enumerate() {
            slots.push((format!("conv{}.weight", i + 1), &mut c.weight.v));
            slots.push((format!("conv{}.bias", i + 1), &mut c.bias.v));
        }
        for (i, l) in self.fcs.iter_mut().enumerate() {
            slots.push((format!("fc{}.weight", i + 1), &mut l.weight.v));
            slots.push((format!("fc{}.bias", i + 1), &mut l.bias.v));
        }
        slots.push(("head.weight".into(), &mut self.head.weight.v));
        slots.push(("head.bias".into(), &mut self.head.bias.v));
        crate::checkpoint::fill_slots(params, slots)
    }

    /// Total number of trainable scalars; matches
    /// [`ClassifierConfig::param_count`].
    pub fn param_count(&self) -> u64 {
        let mut n = 0;
        for c in &self.convs {
            n += c.param_count();
        }
        for l in &self.fcs {
            n += l.param_count();
        }
        n + self.head.param_count()
    }

    fn head_loss(&self, scores: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
        match self.cfg.head {
            HeadKind::Margin => multiclass_hinge_loss(scores, label, self.cfg.margin),
            HeadKind::Softmax => softmax_ce(scores, label),
        }
    }
}

fn relu_vec_grad(z: &[f64], g: &[f64]) -> Vec<f64> {
    z.iter().zip(g).map(|(&v, &gr)| if v > 0.0 { gr } else { 0.0 }).collect()
}

/// Argmax with ties broken toward the lowest ordinal.
pub fn predict_class(model: &ClassifierModel, input: &SliceStack) -> Result<(LesionClass, [f64; NUM_CLASSES])> {
    let scores = model.forward(input)?;
    Ok((argmax_class(&scores), scores))
}

pub fn argmax_class(scores: &[f64; NUM_CLASSES]) -> LesionClass {
    let mut best = 0;
    for i in 1..NUM_CLASSES {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    LesionClass::from_ordinal(best).unwrap()
}

/// One labelled training example.
#[derive(Debug, Clone)]
pub struct LabeledSlice {
    pub stack: SliceStack,
    pub label: LesionClass,
}

fn resize_to_side(stack: &SliceStack, side: usize) -> SliceStack {
    if stack.height() == side && stack.width() == side {
        return stack.clone();
    }
    let mut pixels = Vec::with_capacity(stack.channels() * side * side);
    for c in 0..stack.channels() {
        pixels.extend(bilinear_resize(stack.channel(c), stack.height(), stack.width(), side, side));
    }
    let mut out = SliceStack::new(side, side, stack.tags().to_vec(), pixels, stack.provenance.clone())
        .expect("same tags, fresh dims");
    out.normalized = stack.normalized;
    out
}

fn prepare(sample: &LabeledSlice, policy: Option<&AugmentPolicy>, draw: u64, side: usize) -> Result<FeatureMap> {
    let stack = match policy {
        Some(p) => apply_policy(&sample.stack, p, draw)?,
        None => sample.stack.clone(),
    };
    Ok(FeatureMap::from_stack(&resize_to_side(&stack, side)))
}

/// Mean head loss and accuracy of the eval-mode model over a dataset.
pub fn evaluate_classifier(model: &ClassifierModel, data: &[LabeledSlice]) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for sample in data {
        let x = FeatureMap::from_stack(&resize_to_side(&sample.stack, model.cfg.input_side));
        let (scores, _) = model.forward_map(&x, None);
        loss += model.head_loss(&scores, sample.label.ordinal())?.0;
        if argmax_class(&scores) == sample.label {
            correct += 1;
        }
    }
    Ok((loss / data.len() as f64, correct as f64 / data.len() as f64))
}

/// Trains in place with seeded minibatch SGD and returns the per-iteration
/// history. Test metrics come from a fixed-size eval subset of `test`
/// (falling back to the training set when `test` is empty).
pub fn train_classifier(
    model: &mut ClassifierModel,
    train: &[LabeledSlice],
    test: &[LabeledSlice],
    settings: &TrainSettings,
) -> Result<TrainHistory> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let covered: std::collections::BTreeSet<usize> =
        train.iter().map(|s| s.label.ordinal()).collect();
    debug_assert!(!covered.is_empty());

    let sgd = Sgd {
        learning_rate: settings.learning_rate,
        momentum: settings.momentum,
        weight_decay: settings.weight_decay,
    };
    let mut batch_rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut dropout_rng = model.dropout_rng.clone();
    let eval_pool = if test.is_empty() { train } else { test };
    let eval_set = &eval_pool[..eval_pool.len().min(settings.eval_subset.max(1))];

    let side = model.cfg.input_side;
    let mut history = TrainHistory::new();
    let mut draw_counter: u64 = 0;

    for iter in 1..=settings.iterations {
        // batch_size >= dataset size means deterministic full-batch descent
        let batch: Vec<usize> = if settings.batch_size >= train.len() {
            (0..train.len()).collect()
        } else {
            (0..settings.batch_size).map(|_| batch_rng.gen_range(0..train.len())).collect()
        };
        let batch_len = batch.len();
        let mut batch_loss = 0.0;
        for idx in batch {
            let sample = &train[idx];
            let x = prepare(sample, settings.augment.as_ref(), draw_counter, side)?;
            draw_counter += 1;
            let (scores, cache) = model.forward_map(&x, Some(&mut dropout_rng));
            let (loss, dscores_vec) = model.head_loss(&scores, sample.label.ordinal())?;
            batch_loss += loss;
            let mut dscores = [0.0; NUM_CLASSES];
            for (d, s) in dscores.iter_mut().zip(&dscores_vec) {
                *d = s / batch_len as f64;
            }
            model.backward(&cache, &dscores);
        }
        batch_loss /= batch_len as f64;
        if !batch_loss.is_finite() {
            return Err(Error::DivergedLoss {
                iteration: iter,
                diagnostics: format!("train loss {batch_loss}"),
            });
        }
        model.visit_params(&mut |p| {
            sgd.step(p);
            p.zero_grad();
        });

        let (test_loss, accuracy) = evaluate_classifier(model, eval_set)?;
        history.push(HistoryRow { iteration: iter, train_loss: batch_loss, test_loss, accuracy })?;

        if let Some(target) = settings.early_stop_accuracy {
            if iter % 25 == 0 {
                let (_, train_acc) = evaluate_classifier(model, train)?;
                if train_acc >= target {
                    break;
                }
            }
        }
    }
    model.dropout_rng = dropout_rng;
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Provenance;

    fn plane_stack(side: usize, value: f32) -> SliceStack {
        SliceStack::new(
            side,
            side,
            Plane::ALL.iter().map(|p| ChannelTag::Plane(*p)).collect(),
            vec![value; 3 * side * side],
            Provenance::new("s", "voi"),
        )
        .unwrap()
    }

    #[test]
    fn default_config_shape_contract_by_arithmetic() {
        // The pinned default is too wide to allocate here (fc1 alone holds
        // ~1.5e9 weights at S = 256), so its contract is checked from the
        // closed-form layer arithmetic.
        let cfg = ClassifierConfig::default();
        let (c7, h7, w7) = cfg.feature_shape().unwrap();
        assert_eq!((c7, h7, w7), (512, 27, 27));
        assert_eq!(cfg.param_count().unwrap(), {
            let flat: u64 = 512 * 27 * 27;
            let convs: u64 = (64 * 3 * 9 + 64)
                + (128 * 64 * 9 + 128)
                + (256 * 128 * 9 + 256)
                + (256 * 256 * 9 + 256)
                + (512 * 256 * 9 + 512)
                + (512 * 512 * 9 + 512)
                + (512 * 512 * 9 + 512);
            convs + (flat * 4096 + 4096) + 2 * (4096 * 4096 + 4096) + (4096 * 5 + 5)
        });
    }

    #[test]
    fn reference_config_forward_shape() {
        let cfg = ClassifierConfig::reference();
        let model = build_classifier(&cfg).unwrap();
        let scores = model.forward(&plane_stack(256, 0.5)).unwrap();
        assert_eq!(scores.len(), 5);
        assert!(scores.iter().all(|s| s.is_finite()));
    }

    #[test]
    fn reference_config_param_count_frozen() {
        // Layer arithmetic, recorded once:
        //   convs: 224 + 876 + 1744 + 2320 + 3480 + 5208 + 6944 = 20796
        //   fc1: 23328*256 + 256 = 5972224; fc2 = fc3 = 65792; head = 1285
        let cfg = ClassifierConfig::reference();
        assert_eq!(cfg.param_count().unwrap(), 6_125_889);
        let model = build_classifier(&cfg).unwrap();
        assert_eq!(model.param_count(), 6_125_889);
    }

    #[test]
    fn collapsing_config_rejected() {
        let cfg = ClassifierConfig { input_side: 32, ..ClassifierConfig::default() };
        // S = 32 with 3x3 kernels everywhere collapses before conv7.
        assert!(matches!(build_classifier(&cfg), Err(Error::BadConfig { .. })));
        let cfg = ClassifierConfig { input_side: 8, ..ClassifierConfig::default() };
        assert!(matches!(cfg.feature_shape(), Err(Error::BadConfig { .. })));
    }

    #[test]
    fn shape_contract_over_sides() {
        for side in [64usize, 128, 256] {
            let cfg = ClassifierConfig {
                input_side: side,
                conv_channels: [2; 7],
                fc_width: 8,
                ..ClassifierConfig::default()
            };
            let model = build_classifier(&cfg).unwrap();
            let scores = model.forward(&plane_stack(side, 0.1)).unwrap();
            assert!(scores.iter().all(|s| s.is_finite()), "side {side}");
        }
    }

    #[test]
    fn wrong_channels_and_size_rejected() {
        let cfg = ClassifierConfig { input_side: 64, conv_channels: [2; 7], fc_width: 8, ..Default::default() };
        let model = build_classifier(&cfg).unwrap();

        let modality_stack = SliceStack::new(
            64,
            64,
            vec![
                ChannelTag::Modality(crate::volume::Modality::T1),
                ChannelTag::Modality(crate::volume::Modality::T2),
                ChannelTag::Modality(crate::volume::Modality::Flair),
            ],
            vec![0.0; 3 * 64 * 64],
            Provenance::new("s", "axial:0"),
        )
        .unwrap();
        assert!(matches!(model.forward(&modality_stack), Err(Error::WrongChannels { .. })));

        let small = plane_stack(32, 0.0);
        assert!(matches!(model.forward(&small), Err(Error::WrongSize { .. })));
    }

    #[test]
    fn zero_weights_give_zero_scores() {
        let cfg = ClassifierConfig { input_side: 64, conv_channels: [2; 7], fc_width: 8, ..Default::default() };
        let mut model = build_classifier(&cfg).unwrap();
        model.visit_params(&mut |p| {
            for v in &mut p.v {
                *v = 0.0;
            }
        });
        let scores = model.forward(&plane_stack(64, 0.0)).unwrap();
        assert_eq!(scores, [0.0; 5]);
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let cfg = ClassifierConfig { input_side: 64, conv_channels: [2; 7], fc_width: 8, ..Default::default() };
        let model = build_classifier(&cfg).unwrap();
        let input = plane_stack(64, 0.3);
        let a = model.forward(&input).unwrap();
        let b = model.forward(&input).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn argmax_and_tie_rule() {
        assert_eq!(argmax_class(&[0.1, 0.9, 0.0, 0.0, 0.0]), LesionClass::TumorHgg);
        assert_eq!(argmax_class(&[0.7, 0.7, 0.0, 0.0, 0.0]), LesionClass::Healthy);
    }

    #[test]
    fn argmax_invariant_under_monotone_transform() {
        let scores = [0.3, -1.2, 2.0, 0.9, -0.5];
        let mapped: [f64; 5] = scores.map(|s: f64| (3.0 * s + 1.0).exp());
        assert_eq!(argmax_class(&scores), argmax_class(&mapped));
    }

    #[test]
    fn margin_head_zero_loss_when_satisfied() {
        let cfg = ClassifierConfig { input_side: 64, conv_channels: [2; 7], fc_width: 8, ..Default::default() };
        let model = build_classifier(&cfg).unwrap();
        let (loss, _) = model.head_loss(&[5.0, 0.0, 0.0, 0.0, 0.0], 0).unwrap();
        assert_eq!(loss, 0.0);
    }

    fn tiny_dataset(n: usize, side: usize) -> Vec<LabeledSlice> {
        // Constant-intensity stacks, one intensity band per class.
        (0..n)
            .map(|i| {
                let class = LesionClass::from_ordinal(i % 5).unwrap();
                let v = 0.1 + 0.2 * (i % 5) as f32;
                LabeledSlice { stack: plane_stack(side, v), label: class }
            })
            .collect()
    }

    fn smoke_cfg() -> ClassifierConfig {
        ClassifierConfig {
            input_side: 32,
            conv_channels: [4, 4, 6, 6, 8, 8, 8],
            conv_kernels: [3, 3, 3, 1, 1, 1, 1],
            fc_width: 16,
            dropout_rate: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn empty_dataset_rejected() {
        let mut model = build_classifier(&smoke_cfg()).unwrap();
        let err = train_classifier(&mut model, &[], &[], &TrainSettings::smoke(5)).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset));
    }

    #[test]
    fn zero_learning_rate_keeps_params_bit_exact() {
        let mut model = build_classifier(&smoke_cfg()).unwrap();
        let before = model.named_params();
        let data = tiny_dataset(5, 32);
        let mut settings = TrainSettings::smoke(3);
        settings.learning_rate = 0.0;
        settings.momentum = 0.0;
        train_classifier(&mut model, &data, &[], &settings).unwrap();
        assert_eq!(model.named_params(), before);
    }

    #[test]
    fn loss_decreases_on_fixed_batch() {
        let mut model = build_classifier(&smoke_cfg()).unwrap();
        let data = tiny_dataset(4, 32);
        let mut settings = TrainSettings::smoke(10);
        settings.batch_size = data.len(); // full-batch descent
        settings.learning_rate = 0.005;
        settings.momentum = 0.0;
        let history = train_classifier(&mut model, &data, &[], &settings).unwrap();
        let losses: Vec<f64> = history.rows.iter().map(|r| r.train_loss).collect();
        for w in losses.windows(2) {
            assert!(w[1] < w[0] + 1e-12, "loss not decreasing: {losses:?}");
        }
    }

    #[test]
    fn overfits_tiny_set() {
        let mut model = build_classifier(&smoke_cfg()).unwrap();
        let data = tiny_dataset(10, 32);
        let mut settings = TrainSettings::smoke(150);
        settings.learning_rate = 0.01;
        settings.batch_size = 5;
        settings.early_stop_accuracy = Some(1.0);
        train_classifier(&mut model, &data, &[], &settings).unwrap();
        let (_, acc) = evaluate_classifier(&model, &data).unwrap();
        assert!(acc >= 0.9, "train accuracy {acc}");
        // trained prediction on a training sample returns its class
        let (class, _) = predict_class(&model, &data[1].stack).unwrap();
        assert_eq!(class, data[1].label);
    }
}

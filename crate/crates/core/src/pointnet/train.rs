use alloc::borrow::Cow;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, cross_entropy, forward_prepared, loss_and_grad_prepared, prepare, ModelConfig, ModelParams, Prepared};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::seed;

/// Per-epoch learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    Constant,
    /// `lr (1 + cos(pi e / E)) / 2` for 0-based epoch `e` of `E`.
    #[default]
    Cosine,
}

/// Minibatch gradient descent with momentum: `v = beta v + g`,
/// `theta -= lr v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    #[serde(default)]
    pub schedule: LrSchedule,
    /// Leading set-abstraction stages whose parameters stay fixed.
    #[serde(default)]
    pub frozen_stages: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 8,
            learning_rate: 0.01,
            momentum: 0.9,
            schedule: LrSchedule::Cosine,
            frozen_stages: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Epoch count of the fine-tuning protocol.
    pub const FINETUNE_EPOCHS: usize = 15;

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Learning rate used during 0-based `epoch`.
    pub fn rate_at(&self, epoch: usize) -> f64 {
        match self.schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::Cosine => {
                let t = epoch as f64 / self.epochs.max(1) as f64;
                0.5 * self.learning_rate * (1.0 + libm::cos(core::f64::consts::PI * t))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
    /// Rows are true classes, columns predictions.
    pub confusion: Vec<Vec<usize>>,
}

/// A labeled training or evaluation set.
pub trait Samples {
    fn len(&self) -> usize;
    fn label(&self, i: usize) -> usize;
    /// Sampling and grouping of sample `i`.
    fn prepared(&self, i: usize) -> Result<Cow<'_, Prepared>>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Samples for [(&Prepared, usize)] {
    fn len(&self) -> usize {
        <[_]>::len(self)
    }
    fn label(&self, i: usize) -> usize {
        self[i].1
    }
    fn prepared(&self, i: usize) -> Result<Cow<'_, Prepared>> {
        Ok(Cow::Borrowed(self[i].0))
    }
}

impl Samples for Vec<(&Prepared, usize)> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }
    fn label(&self, i: usize) -> usize {
        self[i].1
    }
    fn prepared(&self, i: usize) -> Result<Cow<'_, Prepared>> {
        Ok(Cow::Borrowed(self[i].0))
    }
}

/// Raw clouds whose sampling and grouping run again on every access, as a
/// sampling layer inside the network would.
#[derive(Debug, Clone, Copy)]
pub struct Resampled<'a> {
    pub cfg: &'a ModelConfig,
    pub clouds: &'a [(&'a PointCloud, usize)],
}

impl Samples for Resampled<'_> {
    fn len(&self) -> usize {
        self.clouds.len()
    }
    fn label(&self, i: usize) -> usize {
        self.clouds[i].1
    }
    fn prepared(&self, i: usize) -> Result<Cow<'_, Prepared>> {
        prepare(self.cfg, self.clouds[i].0.points()).map(Cow::Owned)
    }
}

/// The samples of `inner` listed in `indices`, in that order.
#[derive(Debug, Clone, Copy)]
pub struct Subset<'a, S: ?Sized> {
    pub inner: &'a S,
    pub indices: &'a [usize],
}

impl<S: Samples + ?Sized> Samples for Subset<'_, S> {
    fn len(&self) -> usize {
        self.indices.len()
    }
    fn label(&self, i: usize) -> usize {
        self.inner.label(self.indices[i])
    }
    fn prepared(&self, i: usize) -> Result<Cow<'_, Prepared>> {
        self.inner.prepared(self.indices[i])
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ModelParams> {
    cfg.validate()?;
    let mut rng = seed::rng(seed::stage_seed(seed, "init"));
    let mut p = ModelParams::zeros(cfg);
    let mut off = 0;
    for &(fan_in, fan_out) in &p.shapes.clone() {
        let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        for v in &mut p.values[off..off + fan_in * fan_out] {
            *v = rng.random_range(-limit..=limit);
        }
        off += fan_in * fan_out + fan_out;
    }
    Ok(p)
}

/// Accuracy, mean loss and confusion matrix over a labeled set.
pub fn evaluate<S: Samples + ?Sized>(params: &ModelParams, cfg: &ModelConfig, set: &S) -> Result<Evaluation> {
    params.check(cfg)?;
    if set.is_empty() {
        return Err(Error::invalid("test_set", "must not be empty"));
    }
    let k = cfg.n_classes;
    let mut confusion = vec![vec![0usize; k]; k];
    let mut loss = 0.0;
    for i in 0..set.len() {
        let label = set.label(i);
        if label >= k {
            return Err(Error::invalid("label", "out of range"));
        }
        let logits = forward_prepared(params, cfg, set.prepared(i)?.as_ref());
        loss += cross_entropy(&logits, label).0;
        confusion[label][argmax(&logits)] += 1;
    }
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
    Ok(Evaluation { accuracy: correct as f64 / set.len() as f64, loss: loss / set.len() as f64, confusion })
}

fn run_epochs<S: Samples + ?Sized>(
    mut params: ModelParams,
    cfg: &ModelConfig,
    train_set: &S,
    val_set: &[(&Prepared, usize)],
    tc: &TrainConfig,
) -> Result<(ModelParams, Vec<EpochStats>)> {
    tc.validate()?;
    params.check(cfg)?;
    if train_set.is_empty() {
        return Err(Error::invalid("train_set", "must not be empty"));
    }
    if tc.frozen_stages > cfg.stages.len() {
        return Err(Error::invalid("frozen_stages", "exceeds the stage count"));
    }
    let frozen_layers: usize = cfg.stages[..tc.frozen_stages].iter().map(|s| s.widths.len()).sum();
    let frozen: usize = params.shapes[..frozen_layers].iter().map(|&(i, o)| i * o + o).sum();
    let mut velocity = vec![0.0; params.values.len()];
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let shuffle_seed = seed::stage_seed(tc.seed, "shuffle");
    let mut history = Vec::with_capacity(tc.epochs);
    for epoch in 0..tc.epochs {
        order.sort_unstable();
        order.shuffle(&mut seed::rng(seed::sample_seed(shuffle_seed, epoch as u64)));
        let lr = tc.rate_at(epoch);
        for chunk in order.chunks(tc.batch_size) {
            let preps: Vec<Cow<'_, Prepared>> = chunk.iter().map(|&i| train_set.prepared(i)).collect::<Result<_>>()?;
            let batch: Vec<(&Prepared, usize)> =
                preps.iter().zip(chunk).map(|(p, &i)| (p.as_ref(), train_set.label(i))).collect();
            let (_, grad, _) = loss_and_grad_prepared(&params, cfg, &batch)?;
            for ((p, v), g) in params.values.iter_mut().zip(&mut velocity).zip(&grad).skip(frozen) {
                *v = tc.momentum * *v + g;
                *p -= lr * *v;
            }
        }
        let tr = evaluate(&params, cfg, train_set)?;
        let (val_loss, val_acc) = match val_set.is_empty() {
            true => (f64::NAN, f64::NAN),
            false => {
                let v = evaluate(&params, cfg, val_set)?;
                (v.loss, v.accuracy)
            }
        };
        history.push(EpochStats { epoch: epoch + 1, train_loss: tr.loss, train_acc: tr.accuracy, val_loss, val_acc });
    }
    Ok((params, history))
}

/// Trains from a seeded initialization.
pub fn train<S: Samples + ?Sized>(
    cfg: &ModelConfig,
    train_set: &S,
    val_set: &[(&Prepared, usize)],
    tc: &TrainConfig,
) -> Result<(ModelParams, Vec<EpochStats>)> {
    let params = init_params(cfg, tc.seed)?;
    run_epochs(params, cfg, train_set, val_set, tc)
}

/// Seeded per-class split: each class contributes `round(fraction * n_c)`
/// samples to the first part. Both parts keep ascending index order.
pub fn stratified_split(labels: &[usize], n_classes: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid("fraction", "must lie in [0, 1]"));
    }
    let mut rng = seed::rng(seed::stage_seed(seed, "split"));
    let mut take = vec![false; labels.len()];
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let n = libm::round(fraction * members.len() as f64) as usize;
        for &i in &members[..n] {
            take[i] = true;
        }
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, &t) in take.iter().enumerate() {
        if t { a.push(i) } else { b.push(i) }
    }
    Ok((a, b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneResult {
    pub params: ModelParams,
    pub history: Vec<EpochStats>,
    /// Indices used for fine-tuning.
    pub subset: Vec<usize>,
    /// Indices held out for inference.
    pub held_out: Vec<usize>,
}

/// Continues training every layer of `params` on a stratified `fraction`
/// of `set`; the rest is returned as the held-out part.
pub fn finetune<S: Samples + ?Sized>(
    params: &ModelParams,
    cfg: &ModelConfig,
    set: &S,
    fraction: f64,
    tc: &TrainConfig,
) -> Result<FinetuneResult> {
    params.check(cfg)?;
    let labels: Vec<usize> = (0..set.len()).map(|i| set.label(i)).collect();
    let (subset, held_out) = stratified_split(&labels, cfg.n_classes, fraction, tc.seed)?;
    for class in 0..cfg.n_classes {
        if !subset.iter().any(|&i| labels[i] == class) {
            return Err(Error::SubsetTooSmall { class });
        }
    }
    let train_set = Subset { inner: set, indices: &subset };
    let (params, history) = run_epochs(params.clone(), cfg, &train_set, &[], tc)?;
    Ok(FinetuneResult { params, history, subset, held_out })
}

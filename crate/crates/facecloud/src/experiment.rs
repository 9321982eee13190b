//! Training protocols E1 to E6 on one or two dataset directories.
//!
//! | name | trains on                   | evaluates on           |
//! |------|-----------------------------|------------------------|
//! | E1   | 80% of the source           | the other 20%          |
//! | E2   | 25% of the target, scratch  | the other 75%          |
//! | E3   | 10% of the target, scratch  | the other 90%          |
//! | E4   | all of the raw source       | all of the target      |
//! | E5   | all of the refined source   | all of the target      |
//! | E6   | source, then 15 epochs on 25% (or 10%) of the target | the rest |

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use facecloud_core::pointnet::{
    evaluate, finetune, stratified_split, train, EpochStats, Evaluation, ModelConfig, ModelParams, Resampled, Subset,
    TrainConfig,
};
use facecloud_core::sampling::downsample;
use facecloud_core::{seed, PointCloud};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::dataset::Dataset;
use crate::error::{AppError, AppResult};
use crate::manifest::DatasetKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "UPPERCASE")]
#[value(rename_all = "UPPERCASE")]
pub enum ExperimentName {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    #[value(name = "downsampled-512")]
    #[serde(rename = "downsampled-512")]
    Downsampled512,
}

impl Variant {
    pub fn points(self) -> Option<usize> {
        match self {
            Variant::Full => None,
            Variant::Downsampled512 => Some(512),
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ExperimentName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Self as clap::ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    pub variant: Variant,
    /// Share of the split set used for training or fine-tuning; 1 when the
    /// protocol trains on a whole set.
    pub fraction: f64,
    pub finetune_epochs: usize,
}

impl ExperimentSpec {
    pub fn new(name: ExperimentName, variant: Variant) -> Self {
        let fraction = match name {
            ExperimentName::E1 => 0.8,
            ExperimentName::E2 | ExperimentName::E6 => 0.25,
            ExperimentName::E3 => 0.1,
            ExperimentName::E4 | ExperimentName::E5 => 1.0,
        };
        ExperimentSpec { name, variant, fraction, finetune_epochs: TrainConfig::FINETUNE_EPOCHS }
    }

    /// E6 alone accepts a different fraction, and only 0.25 or 0.1.
    pub fn with_fraction(mut self, fraction: f64) -> AppResult<Self> {
        let ok = match self.name {
            ExperimentName::E6 => fraction == 0.25 || fraction == 0.1,
            _ => fraction == self.fraction,
        };
        if !ok {
            return Err(AppError::Config(format!("fraction {fraction} is not allowed for {}", self.name)));
        }
        self.fraction = fraction;
        Ok(self)
    }

    pub fn eval_fraction(&self) -> f64 {
        match self.name {
            ExperimentName::E4 | ExperimentName::E5 => 1.0,
            _ => 1.0 - self.fraction,
        }
    }

    fn needs_source(&self) -> bool {
        !matches!(self.name, ExperimentName::E2 | ExperimentName::E3)
    }

    fn needs_target(&self) -> bool {
        self.name != ExperimentName::E1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: ExperimentName,
    pub variant: Variant,
    pub config_digest: String,
    pub fraction: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
    pub infer_acc: f64,
    pub wall_time_min: f64,
    pub n_train: usize,
    pub n_infer: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub result: ExperimentResult,
    pub params: ModelParams,
    pub history: Vec<EpochStats>,
    pub inference: Evaluation,
}

/// Per-sample seed of the downsampling step.
pub fn downsample_seed(root: u64, index: usize) -> u64 {
    seed::sample_seed(seed::stage_seed(root, "downsample"), index as u64)
}

/// The clouds a variant trains on: unchanged, or FPS-reduced to its point
/// budget with a per-sample seed.
pub fn variant_clouds(clouds: &[&PointCloud], points: Option<usize>, root: u64) -> AppResult<Vec<PointCloud>> {
    clouds
        .par_iter()
        .enumerate()
        .map(|(i, c)| match points {
            None => Ok((*c).clone()),
            Some(n) => Ok(downsample(c, n, downsample_seed(root, i))?),
        })
        .collect()
}

fn check_dataset(ds: &Dataset, model: &ModelConfig, role: &str) -> AppResult<()> {
    if ds.manifest.n_classes != model.n_classes {
        return Err(AppError::Mismatch(format!(
            "{role} dataset has {} classes, model has {}",
            ds.manifest.n_classes, model.n_classes
        )));
    }
    if ds.samples.is_empty() {
        return Err(AppError::Mismatch(format!("{role} dataset is empty")));
    }
    let need = model.min_points();
    if let Some(s) = ds.samples.iter().find(|s| s.cloud.len() < need) {
        return Err(AppError::Mismatch(format!(
            "{role} sample {} has {} points, model needs {need}",
            s.entry.id,
            s.cloud.len()
        )));
    }
    Ok(())
}

struct Prepared {
    clouds: Vec<PointCloud>,
    labels: Vec<usize>,
}

impl Prepared {
    fn new(ds: &Dataset, points: Option<usize>, root: u64) -> AppResult<Self> {
        let refs: Vec<&PointCloud> = ds.samples.iter().map(|s| &s.cloud).collect();
        Ok(Prepared { clouds: variant_clouds(&refs, points, root)?, labels: ds.labels() })
    }

    fn labeled(&self) -> Vec<(&PointCloud, usize)> {
        self.clouds.iter().zip(&self.labels).map(|(c, &l)| (c, l)).collect()
    }
}

/// Runs one protocol. Every split and training stream derives from
/// `cfg.seed`, so E2 and E6 on the same target share their subset.
pub fn run_experiment(
    spec: &ExperimentSpec,
    cfg: &PipelineConfig,
    source: Option<&Dataset>,
    target: Option<&Dataset>,
) -> AppResult<ExperimentOutcome> {
    cfg.validate()?;
    let model = &cfg.model;
    let root = cfg.seed;
    let tc = TrainConfig { seed: root, ..cfg.train };
    let source = match (spec.needs_source(), source) {
        (true, None) => return Err(AppError::Config(format!("{} needs a source dataset", spec.name))),
        (true, Some(s)) => {
            check_dataset(s, model, "source")?;
            Some(s)
        }
        (false, _) => None,
    };
    let target = match (spec.needs_target(), target) {
        (true, None) => return Err(AppError::Config(format!("{} needs a target dataset", spec.name))),
        (true, Some(t)) => {
            check_dataset(t, model, "target")?;
            Some(t)
        }
        (false, _) => None,
    };
    match (spec.name, source.map(|s| s.manifest.kind)) {
        (ExperimentName::E5, Some(k)) if k != DatasetKind::Refined => {
            return Err(AppError::Mismatch("E5 needs a refined source dataset".into()))
        }
        (ExperimentName::E4, Some(DatasetKind::Refined)) => {
            return Err(AppError::Mismatch("E4 needs a raw source dataset".into()))
        }
        _ => {}
    }

    let t0 = Instant::now();
    let points = spec.variant.points();
    let result = match spec.name {
        ExperimentName::E1 => {
            let a = Prepared::new(source.unwrap(), points, root)?;
            let labeled = a.labeled();
            let set = Resampled { cfg: model, clouds: &labeled };
            let (tr, va) = stratified_split(&a.labels, model.n_classes, spec.fraction, root)?;
            let train_set = Subset { inner: &set, indices: &tr };
            let val_set = Subset { inner: &set, indices: &va };
            let (params, history) = train(model, &train_set, &[], &tc)?;
            let train_eval = evaluate(&params, model, &train_set)?;
            let val = evaluate(&params, model, &val_set)?;
            (params, history, train_eval.accuracy, Some(val.accuracy), val, tr.len())
        }
        ExperimentName::E2 | ExperimentName::E3 => {
            let b = Prepared::new(target.unwrap(), points, root)?;
            let labeled = b.labeled();
            let set = Resampled { cfg: model, clouds: &labeled };
            let (tr, held) = stratified_split(&b.labels, model.n_classes, spec.fraction, root)?;
            let train_set = Subset { inner: &set, indices: &tr };
            let (params, history) = train(model, &train_set, &[], &tc)?;
            let train_eval = evaluate(&params, model, &train_set)?;
            let inf = evaluate(&params, model, &Subset { inner: &set, indices: &held })?;
            (params, history, train_eval.accuracy, None, inf, tr.len())
        }
        ExperimentName::E4 | ExperimentName::E5 => {
            let a = Prepared::new(source.unwrap(), points, root)?;
            let b = Prepared::new(target.unwrap(), points, root)?;
            let (la, lb) = (a.labeled(), b.labeled());
            let train_set = Resampled { cfg: model, clouds: &la };
            let (params, history) = train(model, &train_set, &[], &tc)?;
            let train_eval = evaluate(&params, model, &train_set)?;
            let inf = evaluate(&params, model, &Resampled { cfg: model, clouds: &lb })?;
            (params, history, train_eval.accuracy, None, inf, la.len())
        }
        ExperimentName::E6 => {
            let a = Prepared::new(source.unwrap(), points, root)?;
            let b = Prepared::new(target.unwrap(), points, root)?;
            let (la, lb) = (a.labeled(), b.labeled());
            let (pre, _) = train(model, &Resampled { cfg: model, clouds: &la }, &[], &tc)?;
            let set = Resampled { cfg: model, clouds: &lb };
            let ft_cfg = TrainConfig { epochs: spec.finetune_epochs, ..tc };
            let ft = finetune(&pre, model, &set, spec.fraction, &ft_cfg)?;
            let train_eval = evaluate(&ft.params, model, &Subset { inner: &set, indices: &ft.subset })?;
            let inf = evaluate(&ft.params, model, &Subset { inner: &set, indices: &ft.held_out })?;
            (ft.params, ft.history, train_eval.accuracy, None, inf, ft.subset.len())
        }
    };
    let (params, history, train_acc, val_acc, inference, n_train) = result;
    let wall_time_min = t0.elapsed().as_secs_f64() / 60.0;
    let n_infer = inference.confusion.iter().flatten().sum();
    Ok(ExperimentOutcome {
        result: ExperimentResult {
            name: spec.name,
            variant: spec.variant,
            config_digest: cfg.digest(),
            fraction: spec.fraction,
            train_acc,
            val_acc,
            infer_acc: inference.accuracy,
            wall_time_min,
            n_train,
            n_infer,
        },
        params,
        history,
        inference,
    })
}

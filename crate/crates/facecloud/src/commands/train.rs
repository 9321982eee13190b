use std::path::Path;

use facecloud_core::pointnet::{
    evaluate, finetune, prepare, stratified_split, train, EpochStats, Evaluation, ModelParams, Prepared, Resampled,
    Subset, TrainConfig,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::cli::{required, Context, FinetuneArgs, TrainArgs};
use crate::config::ensure_output_dir;
use crate::dataset::Dataset;
use crate::error::{AppError, AppResult};
use crate::report::{num, write_csv, write_json};

pub fn write_history(path: &Path, digest: &str, history: &[EpochStats]) -> AppResult<()> {
    let rows: Vec<Vec<String>> = history
        .iter()
        .map(|h| vec![h.epoch.to_string(), num(h.train_loss), num(h.train_acc), num(h.val_loss), num(h.val_acc)])
        .collect();
    write_csv(path, digest, &["epoch", "train_loss", "train_acc", "val_loss", "val_acc"], &rows)
}

pub fn write_confusion(path: &Path, digest: &str, eval: &Evaluation) -> AppResult<()> {
    let k = eval.confusion.len();
    let header: Vec<String> = std::iter::once("true".to_string()).chain((0..k).map(|c| format!("pred_{c}"))).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = eval
        .confusion
        .iter()
        .enumerate()
        .map(|(t, row)| std::iter::once(t.to_string()).chain(row.iter().map(usize::to_string)).collect())
        .collect();
    write_csv(path, digest, &header, &rows)
}

pub fn save_model(ctx: &Context, path: &Path, params: &ModelParams) -> AppResult<()> {
    Checkpoint { config_digest: ctx.cfg.digest_bytes(), model: ctx.cfg.model.clone(), params: params.clone() }.save(path)
}

pub fn check_classes(ctx: &Context, ds: &Dataset) -> AppResult<()> {
    if ds.manifest.n_classes != ctx.cfg.model.n_classes {
        return Err(AppError::Mismatch(format!(
            "dataset has {} classes, model has {}",
            ds.manifest.n_classes, ctx.cfg.model.n_classes
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct TrainResult {
    config_digest: String,
    train_acc: f64,
    val_acc: Option<f64>,
    n_train: usize,
    n_val: usize,
}

pub fn run_train(mut ctx: Context, a: &TrainArgs) -> AppResult<()> {
    if let Some(e) = a.epochs {
        ctx.cfg.train.epochs = e;
        ctx.refresh();
    }
    ctx.cfg.model.validate()?;
    ctx.cfg.train.validate()?;
    if !(0.0..1.0).contains(&a.val_fraction) {
        return Err(AppError::Config("`val_fraction` must lie in [0, 1)".into()));
    }
    let data = required(&a.data, &ctx.cfg.paths.data, "data")?;
    let out = required(&a.out, &ctx.cfg.paths.output, "output")?;
    let ds = Dataset::load(&data)?;
    check_classes(&ctx, &ds)?;
    ensure_output_dir(&out)?;
    let model = &ctx.cfg.model;
    let labeled = ds.labeled();
    let set = Resampled { cfg: model, clouds: &labeled };
    let (tr, va) = stratified_split(&ds.labels(), model.n_classes, 1.0 - a.val_fraction, ctx.cfg.seed)?;
    let val: Vec<(Prepared, usize)> = va
        .par_iter()
        .map(|&i| Ok((prepare(model, labeled[i].0.points())?, labeled[i].1)))
        .collect::<AppResult<_>>()?;
    let val_refs: Vec<(&Prepared, usize)> = val.iter().map(|(p, l)| (p, *l)).collect();
    let tc = TrainConfig { seed: ctx.cfg.seed, ..ctx.cfg.train };
    let train_set = Subset { inner: &set, indices: &tr };
    let (params, history) = train(model, &train_set, &val_refs, &tc)?;
    let train_acc = evaluate(&params, model, &train_set)?.accuracy;
    let val_acc = (!val_refs.is_empty()).then(|| evaluate(&params, model, val_refs.as_slice())).transpose()?.map(|e| e.accuracy);
    save_model(&ctx, &out.join("model.fpnm"), &params)?;
    write_history(&out.join("history.csv"), &ctx.digest, &history)?;
    let res = TrainResult { config_digest: ctx.digest.clone(), train_acc, val_acc, n_train: tr.len(), n_val: va.len() };
    write_json(&out.join("results.json"), &res)?;
    println!("train_acc {train_acc:.4} val_acc {}", val_acc.map_or("-".into(), |v| format!("{v:.4}")));
    Ok(())
}

#[derive(Debug, Serialize)]
struct FinetuneReport {
    config_digest: String,
    fraction: f64,
    epochs: usize,
    train_acc: f64,
    infer_acc: f64,
    n_train: usize,
    n_infer: usize,
}

pub fn run_finetune(ctx: Context, a: &FinetuneArgs) -> AppResult<()> {
    ctx.cfg.train.validate()?;
    let model_path = required(&a.model, &ctx.cfg.paths.model, "model")?;
    let data = required(&a.data, &ctx.cfg.paths.data, "data")?;
    let out = required(&a.out, &ctx.cfg.paths.output, "output")?;
    let model = &ctx.cfg.model;
    let ck = Checkpoint::load(&model_path, model)?;
    let ds = Dataset::load(&data)?;
    check_classes(&ctx, &ds)?;
    ensure_output_dir(&out)?;
    let labeled = ds.labeled();
    let set = Resampled { cfg: model, clouds: &labeled };
    let tc = TrainConfig { seed: ctx.cfg.seed, epochs: a.epochs, ..ctx.cfg.train };
    let ft = finetune(&ck.params, model, &set, a.fraction, &tc)?;
    let train_acc = evaluate(&ft.params, model, &Subset { inner: &set, indices: &ft.subset })?.accuracy;
    let inf = evaluate(&ft.params, model, &Subset { inner: &set, indices: &ft.held_out })?;
    save_model(&ctx, &out.join("model.fpnm"), &ft.params)?;
    write_history(&out.join("history.csv"), &ctx.digest, &ft.history)?;
    write_confusion(&out.join("confusion.csv"), &ctx.digest, &inf)?;
    let rep = FinetuneReport {
        config_digest: ctx.digest.clone(),
        fraction: a.fraction,
        epochs: a.epochs,
        train_acc,
        infer_acc: inf.accuracy,
        n_train: ft.subset.len(),
        n_infer: ft.held_out.len(),
    };
    write_json(&out.join("results.json"), &rep)?;
    println!("finetuned on {} samples, infer_acc {:.4}", rep.n_train, rep.infer_acc);
    Ok(())
}

use facecloud_core::pointnet::{evaluate, stratified_split, Resampled};
use facecloud_core::sampling::{apply_mask, downsample, MaskSpec};
use facecloud_core::{Error, PointCloud};
use rayon::prelude::*;

use crate::checkpoint::Checkpoint;
use crate::cli::{required, Context, MaskEvalArgs};
use crate::commands::parse_mask;
use crate::commands::train::check_classes;
use crate::dataset::Dataset;
use crate::error::{AppError, AppResult};
use crate::experiment::downsample_seed;
use crate::report::{num, write_csv};

#[derive(Debug, Clone, PartialEq)]
pub struct MaskRow {
    pub mask: String,
    /// `ok`, `partial` when some samples could not be masked, or `failed`
    /// when none could.
    pub status: &'static str,
    pub accuracy: Option<f64>,
    pub n: usize,
    pub n_failed: usize,
}

pub fn run(ctx: Context, a: &MaskEvalArgs) -> AppResult<()> {
    let model = &ctx.cfg.model;
    let model_path = required(&a.model, &ctx.cfg.paths.model, "model")?;
    let data = required(&a.data, &ctx.cfg.paths.data, "data")?;
    let ck = Checkpoint::load(&model_path, model)?;
    let masks = a.masks.iter().filter(|m| !m.trim().is_empty()).map(|m| parse_mask(m)).collect::<AppResult<Vec<_>>>()?;
    if !(0.0..1.0).contains(&a.split_fraction) {
        return Err(AppError::Config("`split_fraction` must lie in [0, 1)".into()));
    }
    let ds = Dataset::load(&data)?;
    check_classes(&ctx, &ds)?;
    let (_, held) = stratified_split(&ds.labels(), model.n_classes, a.split_fraction, ctx.cfg.seed)?;
    let root = ctx.cfg.seed;

    let eval_row = |name: String, mask: Option<&MaskSpec>| -> AppResult<MaskRow> {
        let clouds = held
            .par_iter()
            .map(|&i| {
                let s = &ds.samples[i];
                let masked = match mask {
                    None => s.cloud.clone(),
                    Some(m) => match apply_mask(&s.cloud, m, s.entry.eyes.as_ref()) {
                        Ok(c) => c,
                        Err(Error::MaskRemovesAll | Error::EyesRequired) => return Ok(None),
                        Err(e) => return Err(AppError::from(e)),
                    },
                };
                let c = match a.points {
                    Some(n) => downsample(&masked, n, downsample_seed(root, i))?,
                    None => masked,
                };
                Ok((c.len() >= model.min_points()).then_some((c, s.entry.label)))
            })
            .collect::<AppResult<Vec<Option<(PointCloud, usize)>>>>()?;
        let ok: Vec<(&PointCloud, usize)> = clouds.iter().flatten().map(|(c, l)| (c, *l)).collect();
        let n_failed = clouds.len() - ok.len();
        if ok.is_empty() {
            return Ok(MaskRow { mask: name, status: "failed", accuracy: None, n: 0, n_failed });
        }
        let acc = evaluate(&ck.params, model, &Resampled { cfg: model, clouds: &ok })?.accuracy;
        let status = if n_failed == 0 { "ok" } else { "partial" };
        Ok(MaskRow { mask: name, status, accuracy: Some(acc), n: ok.len(), n_failed })
    };

    let mut rows = vec![eval_row("full".into(), None)?];
    for m in &masks {
        rows.push(eval_row(m.label(), Some(m))?);
    }
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![r.mask.clone(), r.status.into(), r.accuracy.map(num).unwrap_or_default(), r.n.to_string(), r.n_failed.to_string()]
        })
        .collect();
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        crate::config::ensure_output_dir(dir)?;
    }
    write_csv(&a.out, &ctx.digest, &["mask", "status", "accuracy", "n", "n_failed"], &csv_rows)?;
    for r in &rows {
        println!("{:<28} {:<8} {}", r.mask, r.status, r.accuracy.map_or("-".into(), |v| format!("{v:.4}")));
    }
    Ok(())
}

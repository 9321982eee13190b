use std::collections::BTreeMap;

use facecloud_core::sampling::apply_mask;
use facecloud_core::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::cli::{required, Context, MaskArgs, SampleArgs};
use crate::commands::parse_mask;
use crate::config::ensure_output_dir;
use crate::dataset::{create_sample_dir, write_sample, Dataset};
use crate::error::{AppError, AppResult};
use crate::experiment::variant_clouds;
use crate::manifest::{DatasetKind, Entry, Manifest, FORMAT_VERSION};
use crate::report::write_json;

fn save(ctx: &Context, out: &std::path::Path, ds: &Dataset, kind: DatasetKind, entries: Vec<Entry>) -> AppResult<()> {
    let m = Manifest {
        format_version: FORMAT_VERSION,
        config_digest: ctx.digest.clone(),
        seed: ctx.cfg.seed,
        kind,
        n_classes: ds.manifest.n_classes,
        entries,
    };
    m.save(out)
}

pub fn run_sample(mut ctx: Context, a: &SampleArgs) -> AppResult<()> {
    if let Some(n) = a.points {
        ctx.cfg.sample.n_centroids = n;
        ctx.refresh();
    }
    ctx.cfg.sample.validate()?;
    let input = required(&a.input, &ctx.cfg.paths.data, "data")?;
    let out = required(&a.out, &ctx.cfg.paths.output, "output")?;
    let ds = Dataset::load(&input)?;
    ensure_output_dir(&out)?;
    create_sample_dir(&out)?;
    let refs: Vec<_> = ds.samples.iter().map(|s| &s.cloud).collect();
    let clouds = variant_clouds(&refs, Some(ctx.cfg.sample.n_centroids), ctx.cfg.seed)?;
    let comment = [ctx.comment()];
    let entries = ds
        .samples
        .par_iter()
        .zip(&clouds)
        .map(|(s, c)| {
            let (path, tags_path) = write_sample(&out, &s.entry.id, c, &comment)?;
            Ok(Entry { path, tags_path, ..s.entry.clone() })
        })
        .collect::<AppResult<Vec<_>>>()?;
    save(&ctx, &out, &ds, DatasetKind::Sampled, entries)?;
    println!("sampled {} clouds to {} points", clouds.len(), ctx.cfg.sample.n_centroids);
    Ok(())
}

#[derive(Debug, Serialize)]
struct MaskSummary {
    config_digest: String,
    mask: String,
    total: usize,
    kept: usize,
    failures: BTreeMap<String, usize>,
}

pub fn run_mask(mut ctx: Context, a: &MaskArgs) -> AppResult<()> {
    if let Some(m) = &a.mask {
        ctx.cfg.mask = Some(parse_mask(m)?);
        ctx.refresh();
    }
    let spec = ctx.cfg.mask.ok_or_else(|| AppError::Config("missing `mask` (flag or config)".into()))?;
    spec.validate()?;
    let input = required(&a.input, &ctx.cfg.paths.data, "data")?;
    let out = required(&a.out, &ctx.cfg.paths.output, "output")?;
    let ds = Dataset::load(&input)?;
    ensure_output_dir(&out)?;
    create_sample_dir(&out)?;
    let comment = [ctx.comment()];
    let results = ds
        .samples
        .par_iter()
        .map(|s| match apply_mask(&s.cloud, &spec, s.entry.eyes.as_ref()) {
            Ok(c) => {
                let (path, tags_path) = write_sample(&out, &s.entry.id, &c, &comment)?;
                Ok(Ok(Entry { path, tags_path, ..s.entry.clone() }))
            }
            Err(e @ (Error::MaskRemovesAll | Error::EyesRequired)) => Ok(Err(e)),
            Err(e) => Err(AppError::from(e)),
        })
        .collect::<AppResult<Vec<_>>>()?;
    let mut failures = BTreeMap::new();
    let mut entries = Vec::new();
    for r in results {
        match r {
            Ok(e) => entries.push(e),
            Err(e) => *failures.entry(e.to_string()).or_insert(0) += 1,
        }
    }
    let summary = MaskSummary { config_digest: ctx.digest.clone(), mask: spec.label(), total: ds.samples.len(), kept: entries.len(), failures };
    write_json(&out.join("summary.json"), &summary)?;
    let kept = entries.len();
    save(&ctx, &out, &ds, DatasetKind::Masked, entries)?;
    println!("masked {kept}/{} clouds with {}", summary.total, summary.mask);
    if kept == 0 && summary.total > 0 {
        return Err(AppError::Pipeline(format!("mask {} failed on every sample", summary.mask)));
    }
    Ok(())
}

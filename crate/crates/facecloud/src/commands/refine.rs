use std::collections::BTreeMap;
use std::fs;

use facecloud_core::facecrop::{refine_traced, Clock, NoClock, RefineReport, Stage};
use facecloud_core::geometry::Region;
use facecloud_core::{Error, PointCloud};
use rayon::prelude::*;
use serde::Serialize;

use crate::cli::{required, Context, RefineArgs};
use crate::clock::StdClock;
use crate::config::ensure_output_dir;
use crate::dataset::{create_sample_dir, write_sample, Dataset, Sample};
use crate::error::{AppError, AppResult};
use crate::manifest::{DatasetKind, Entry, Manifest, FORMAT_VERSION};
use crate::report::write_json;

#[derive(Debug, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
enum SampleReport<'a> {
    Refined {
        id: &'a str,
        #[serde(flatten)]
        report: RefineReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        face_retention: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        non_face_removal: Option<f64>,
        /// Largest distance to the ground-truth eyes, mm.
        #[serde(skip_serializing_if = "Option::is_none")]
        eye_error_mm: Option<f64>,
    },
    Failed {
        id: &'a str,
        stage: Option<Stage>,
        error: String,
        passthrough: bool,
    },
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub config_digest: String,
    pub total: usize,
    pub refined: usize,
    pub failed: usize,
    pub passthrough: usize,
    /// Failures per stage; every stage is listed.
    pub failures_by_stage: BTreeMap<&'static str, usize>,
    pub mean_face_retention: Option<f64>,
    pub mean_non_face_removal: Option<f64>,
    pub mean_eye_error_mm: Option<f64>,
}

/// Tag-based scores of a crop: retained share of face points and removed
/// share of the rest.
fn tag_scores(cloud: &PointCloud, report: &RefineReport) -> Option<(f64, f64)> {
    let tags = cloud.tags()?;
    let (mut face, mut face_kept, mut other, mut other_removed) = (0usize, 0usize, 0usize, 0usize);
    for (p, t) in cloud.points().iter().zip(tags) {
        let kept = report.plane.signed_distance(*p) > 0.0;
        if *t == Region::Face {
            face += 1;
            face_kept += kept as usize;
        } else {
            other += 1;
            other_removed += !kept as usize;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    Some((ratio(face_kept, face), ratio(other_removed, other)))
}

fn mean(v: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let vals: Vec<f64> = v.flatten().collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

struct Outcome {
    entry: Option<Entry>,
    stage: Option<Stage>,
    refined: bool,
    scores: Option<(f64, f64)>,
    eye_error: Option<f64>,
}

fn process(ctx: &Context, a: &RefineArgs, out: &std::path::Path, s: &Sample) -> AppResult<Outcome> {
    let clock: &dyn Clock = if a.timings { &StdClock::default() } else { &NoClock };
    let id = s.entry.id.as_str();
    let comment = [ctx.comment()];
    let (res, _) = refine_traced(&s.cloud, &ctx.cfg.crop, clock);
    let report_path = out.join("reports").join(format!("{id}.json"));
    match res {
        Ok((cropped, report)) => {
            let scores = tag_scores(&s.cloud, &report);
            let eye_error = s.entry.eyes.map(|gt| {
                let d = |p: facecloud_core::Vec3, q: facecloud_core::Vec3| (p - q).norm();
                d(report.eyes.left, gt.left).max(d(report.eyes.right, gt.right))
            });
            let (path, tags_path) = write_sample(out, id, &cropped, &comment)?;
            let entry = Entry { path, tags_path, eyes: Some(report.eyes), ..s.entry.clone() };
            write_json(
                &report_path,
                &SampleReport::Refined {
                    id,
                    report,
                    face_retention: scores.map(|s| s.0),
                    non_face_removal: scores.map(|s| s.1),
                    eye_error_mm: eye_error,
                },
            )?;
            Ok(Outcome { entry: Some(entry), stage: None, refined: true, scores, eye_error })
        }
        Err(e) => {
            let stage = match &e {
                Error::Refine { stage, .. } => Some(*stage),
                _ => None,
            };
            if stage.is_none() {
                // Configuration problems are not per-sample failures.
                return Err(e.into());
            }
            let entry = if a.fallback_raw {
                let (path, tags_path) = write_sample(out, id, &s.cloud, &comment)?;
                Some(Entry { path, tags_path, eyes: None, ..s.entry.clone() })
            } else {
                None
            };
            write_json(
                &report_path,
                &SampleReport::Failed { id, stage, error: e.to_string(), passthrough: a.fallback_raw },
            )?;
            Ok(Outcome { entry, stage, refined: false, scores: None, eye_error: None })
        }
    }
}

pub fn run(ctx: Context, a: &RefineArgs) -> AppResult<()> {
    ctx.cfg.crop.validate()?;
    let input = required(&a.input, &ctx.cfg.paths.data, "data")?;
    let out = required(&a.out, &ctx.cfg.paths.output, "output")?;
    let ds = Dataset::load(&input)?;
    ensure_output_dir(&out)?;
    create_sample_dir(&out)?;
    let reports = out.join("reports");
    fs::create_dir_all(&reports).map_err(|e| AppError::io(&reports, e))?;

    let outcomes = ds.samples.par_iter().map(|s| process(&ctx, a, &out, s)).collect::<AppResult<Vec<_>>>()?;

    let mut failures_by_stage: BTreeMap<&'static str, usize> = Stage::ALL.iter().map(|s| (s.name(), 0)).collect();
    for o in &outcomes {
        if let Some(st) = o.stage {
            *failures_by_stage.get_mut(st.name()).unwrap() += 1;
        }
    }
    let refined = outcomes.iter().filter(|o| o.refined).count();
    let failed = outcomes.len() - refined;
    let summary = Summary {
        config_digest: ctx.digest.clone(),
        total: outcomes.len(),
        refined,
        failed,
        passthrough: if a.fallback_raw { failed } else { 0 },
        failures_by_stage,
        mean_face_retention: mean(outcomes.iter().map(|o| o.scores.map(|s| s.0))),
        mean_non_face_removal: mean(outcomes.iter().map(|o| o.scores.map(|s| s.1))),
        mean_eye_error_mm: mean(outcomes.iter().map(|o| o.eye_error)),
    };
    write_json(&out.join("summary.json"), &summary)?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        config_digest: ctx.digest.clone(),
        seed: ctx.cfg.seed,
        kind: if a.fallback_raw && refined == 0 { ds.manifest.kind } else { DatasetKind::Refined },
        n_classes: ds.manifest.n_classes,
        entries: outcomes.into_iter().filter_map(|o| o.entry).collect(),
    };
    manifest.save(&out)?;
    println!("refined {refined}/{} samples, {failed} failed", summary.total);
    if refined == 0 && !a.fallback_raw && summary.total > 0 {
        return Err(AppError::Pipeline(format!("all {} samples failed to refine", summary.total)));
    }
    Ok(())
}

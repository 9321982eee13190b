use facecloud_core::synth::{generate_dataset, DatasetSpec, HeadParams};
use facecloud_core::PointCloud;
use rayon::prelude::*;

use crate::cli::{required, Context, SynthArgs};
use crate::config::ensure_output_dir;
use crate::dataset::{create_sample_dir, write_sample};
use crate::error::AppResult;
use crate::manifest::{DatasetKind, Entry, Manifest, FORMAT_VERSION};

const SPHERE_RADIUS: f64 = 90.0;
const SPHERE_POINTS: usize = 4000;

pub fn run(mut ctx: Context, a: &SynthArgs) -> AppResult<()> {
    let s = &mut ctx.cfg.synth;
    if let Some(n) = a.n_per_class {
        s.n_per_class = n;
    }
    s.face_only |= a.face_only;
    let dist = if a.shifted { &mut s.shifted } else { &mut s.population };
    if let Some(k) = a.n_classes {
        dist.base.n_classes = k;
    }
    if let Some(r) = a.pose_range {
        *dist = dist.clone().with_pose_range(r, r);
    }
    let spec = DatasetSpec { n_per_class: s.n_per_class, distribution: dist.clone(), face_only: s.face_only, seed: ctx.cfg.seed };
    ctx.refresh();
    let mut plans = generate_dataset(&spec)?;
    if a.sphere {
        for p in &mut plans {
            p.params = HeadParams {
                kappa: p.params.kappa,
                n_classes: p.params.n_classes,
                noise_sigma: p.params.noise_sigma,
                pose: p.params.pose,
                ..HeadParams::featureless_sphere(SPHERE_RADIUS, SPHERE_POINTS)
            };
            p.face_only = false;
        }
    }
    let out = required(&a.out, &ctx.cfg.paths.output, "output")?;
    ensure_output_dir(&out)?;
    create_sample_dir(&out)?;
    let comment = ctx.comment();
    let entries = plans
        .par_iter()
        .map(|p| {
            let (cloud, gt) = p.generate()?;
            let cloud = match cloud.tags() {
                Some(_) => cloud,
                None => PointCloud::with_tags(cloud.into_parts().0, gt.tags.clone())?,
            };
            let id = format!("s{:05}", p.index);
            let (path, tags_path) = write_sample(&out, &id, &cloud, std::slice::from_ref(&comment))?;
            Ok(Entry {
                id,
                path,
                label: p.label,
                tags_path,
                eyes: (!a.sphere).then_some(gt.eyes),
                kappa: Some(p.params.kappa),
                seed: Some(p.seed),
                params: Some(p.params),
            })
        })
        .collect::<AppResult<Vec<_>>>()?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        config_digest: ctx.digest.clone(),
        seed: ctx.cfg.seed,
        kind: DatasetKind::Synthetic,
        n_classes: spec.distribution.base.n_classes,
        entries,
    };
    manifest.save(&out)?;
    println!("wrote {} samples to {}", manifest.entries.len(), out.display());
    Ok(())
}

use crate::cli::{required, Context, ExperimentArgs};
use crate::commands::train::{save_model, write_confusion, write_history};
use crate::config::ensure_output_dir;
use crate::dataset::Dataset;
use crate::error::AppResult;
use crate::experiment::{run_experiment, ExperimentSpec};
use crate::report::write_json;

pub fn run(mut ctx: Context, a: &ExperimentArgs) -> AppResult<()> {
    if let Some(e) = a.epochs {
        ctx.cfg.train.epochs = e;
        ctx.refresh();
    }
    let mut spec = ExperimentSpec::new(a.name, a.variant);
    if let Some(f) = a.fraction {
        spec = spec.with_fraction(f)?;
    }
    let out = required(&a.out, &ctx.cfg.paths.output, "output")?;
    let load = |p: Option<std::path::PathBuf>| p.map(|p| Dataset::load(&p)).transpose();
    let source = load(a.source.clone().or_else(|| ctx.cfg.paths.source.clone()))?;
    let target = load(a.target.clone().or_else(|| ctx.cfg.paths.target.clone()))?;
    let outcome = run_experiment(&spec, &ctx.cfg, source.as_ref(), target.as_ref())?;
    ensure_output_dir(&out)?;
    save_model(&ctx, &out.join("model.fpnm"), &outcome.params)?;
    write_history(&out.join("history.csv"), &ctx.digest, &outcome.history)?;
    write_confusion(&out.join("confusion.csv"), &ctx.digest, &outcome.inference)?;
    write_json(&out.join("results.json"), &outcome.result)?;
    let r = &outcome.result;
    println!(
        "{} {:?}: train_acc {:.4} infer_acc {:.4} wall_time_min {:.3}",
        r.name, r.variant, r.train_acc, r.infer_acc, r.wall_time_min
    );
    Ok(())
}

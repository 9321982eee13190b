use facecloud_core::linkbudget::{sweep, FaceModel, SpacingRule};

use crate::cli::{BandwidthArgs, Context};
use crate::error::AppResult;
use crate::report::{csv_string, num};

pub fn run(ctx: Context, a: &BandwidthArgs) -> AppResult<()> {
    let face = FaceModel::new(a.width.unwrap_or(FaceModel::default().width), a.height.unwrap_or(FaceModel::default().height))?;
    let rows: Vec<Vec<String>> = sweep(&a.points, &face, SpacingRule::default())?
        .iter()
        .map(|b| vec![b.n_points.to_string(), num(b.spacing * 1e3), num(b.bandwidth / 1e9)])
        .collect();
    let text = csv_string(&ctx.digest, &["n_points", "spacing_mm", "bandwidth_ghz"], &rows);
    match &a.csv {
        Some(p) => std::fs::write(p, &text).map_err(|e| crate::error::AppError::io(p, e))?,
        None => print!("{text}"),
    }
    Ok(())
}

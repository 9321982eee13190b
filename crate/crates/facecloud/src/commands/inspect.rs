use facecloud_core::facecrop::{refine_traced, RefineReport};
use serde::Serialize;

use crate::cli::{Context, InspectArgs};
use crate::clock::StdClock;
use crate::config::ensure_output_dir;
use crate::error::AppResult;
use crate::pgm::write_pgm;
use crate::ply::read_cloud;
use crate::report::{num, write_csv, write_json};

#[derive(Debug, Serialize)]
struct InspectReport {
    config_digest: String,
    input_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<RefineReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub fn run(ctx: Context, a: &InspectArgs) -> AppResult<()> {
    ctx.cfg.crop.validate()?;
    let cloud = read_cloud(&a.input)?;
    ensure_output_dir(&a.out)?;
    let (res, trace) = refine_traced(&cloud, &ctx.cfg.crop, &StdClock::default());
    for p in &trace.projections {
        let name = p.axis.name();
        write_pgm(&a.out.join(format!("{name}_raw.pgm")), &p.raw)?;
        write_pgm(&a.out.join(format!("{name}_morphed.pgm")), &p.morphed)?;
        write_pgm(&a.out.join(format!("{name}_edges.pgm")), &p.edges)?;
        let rows: Vec<Vec<String>> = p
            .circles
            .iter()
            .take(a.top)
            .map(|c| vec![num(c.center.0), num(c.center.1), num(c.radius), c.votes.to_string(), num(c.confidence)])
            .collect();
        write_csv(&a.out.join(format!("{name}_circles.csv")), &ctx.digest, &["u", "v", "r", "votes", "confidence"], &rows)?;
    }
    let (report, error) = match res {
        Ok((_, r)) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    match &error {
        Some(e) => println!("refine failed: {e}"),
        None => println!("refine succeeded"),
    }
    write_json(&a.out.join("report.json"), &InspectReport { config_digest: ctx.digest, input_points: cloud.len(), report, error })
}

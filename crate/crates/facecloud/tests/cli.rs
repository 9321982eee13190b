mod common;

use std::fs;

use common::{files, p, run, run_ok, write_tiny_config};
use facecloud::checkpoint::Checkpoint;
use facecloud::config::PipelineConfig;
use facecloud::dataset::Dataset;
use facecloud::experiment::ExperimentResult;
use facecloud::report::read_csv;
use facecloud_core::pointnet::{evaluate, init_params, stratified_split, Resampled, Subset};
use serde_json::Value;
use tempfile::tempdir;

#[test]
fn synth_writes_six_clouds_and_a_manifest() {
    let d = tempdir().unwrap();
    let out = d.path().join("ds");
    run_ok(&["synth", "--out", p(&out), "--n-per-class", "2", "--seed", "4"]);
    let plys = files(&out).into_iter().filter(|f| f.extension().is_some_and(|e| e == "ply")).count();
    assert_eq!(plys, 6);
    let ds = Dataset::load(&out).unwrap();
    assert_eq!(ds.samples.len(), 6);
    assert_eq!(ds.labels(), vec![0, 1, 2, 0, 1, 2]);
    assert!(ds.samples.iter().all(|s| s.cloud.tags().is_some() && s.entry.eyes.is_some()));
}

#[test]
fn synth_is_deterministic_per_seed() {
    let d = tempdir().unwrap();
    let [a, b, c] = ["a", "b", "c"].map(|n| d.path().join(n));
    run_ok(&["synth", "--out", p(&a), "--n-per-class", "2", "--seed", "4"]);
    run_ok(&["synth", "--out", p(&b), "--n-per-class", "2", "--seed", "4"]);
    run_ok(&["synth", "--out", p(&c), "--n-per-class", "2", "--seed", "5"]);
    let m = |dir: &std::path::Path| fs::read(dir.join("manifest.json")).unwrap();
    assert_eq!(m(&a), m(&b));
    assert_ne!(m(&a), m(&c));
    for f in files(&a) {
        assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap(), "{f:?}");
    }
}

#[test]
fn zero_classes_is_a_config_error_naming_the_field() {
    let d = tempdir().unwrap();
    let out = run(&["synth", "--out", p(&d.path().join("x")), "--n-classes", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_classes"));
}

#[test]
fn malformed_config_exits_with_two() {
    let d = tempdir().unwrap();
    let cfg = d.path().join("bad.json");
    fs::write(&cfg, r#"{"crop": {"resolution": 2}}"#).unwrap();
    let out = run(&["--config", p(&cfg), "refine", "--input", p(d.path()), "--out", p(&d.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    fs::write(&cfg, "{ not json").unwrap();
    let out = run(&["--config", p(&cfg), "bandwidth"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn refine_succeeds_on_synthetic_heads() {
    let d = tempdir().unwrap();
    let (src, dst) = (d.path().join("src"), d.path().join("dst"));
    run_ok(&["synth", "--out", p(&src), "--n-per-class", "4", "--seed", "8"]);
    run_ok(&["refine", "--input", p(&src), "--out", p(&dst), "--jobs", "2"]);
    let summary: Value = serde_json::from_str(&fs::read_to_string(dst.join("summary.json")).unwrap()).unwrap();
    let refined = summary["refined"].as_u64().unwrap() as f64;
    assert!(refined / 12.0 >= 0.95, "{summary}");
    assert!(summary["mean_face_retention"].as_f64().unwrap() > 0.95);
    let ds = Dataset::load(&dst).unwrap();
    assert_eq!(ds.samples.len() as f64, refined);
    let raw = Dataset::load(&src).unwrap();
    for (r, s) in ds.samples.iter().zip(&raw.samples) {
        assert!(r.cloud.len() < s.cloud.len());
    }
    assert!(dst.join("reports/s00000.json").exists());
}

#[test]
fn spheres_fail_at_hough_unless_passed_through() {
    let d = tempdir().unwrap();
    let src = d.path().join("src");
    run_ok(&["synth", "--out", p(&src), "--n-per-class", "1", "--sphere"]);
    let failed = d.path().join("failed");
    let out = run(&["refine", "--input", p(&src), "--out", p(&failed)]);
    assert_eq!(out.status.code(), Some(3));
    let summary: Value = serde_json::from_str(&fs::read_to_string(failed.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["failures_by_stage"]["hough"], 3);
    assert_eq!(summary["refined"], 0);
    let report: Value = serde_json::from_str(&fs::read_to_string(failed.join("reports/s00001.json")).unwrap()).unwrap();
    assert!(report["error"].as_str().unwrap().contains("no plausible eye pair"));

    let passed = d.path().join("passed");
    run_ok(&["refine", "--input", p(&src), "--out", p(&passed), "--fallback-raw"]);
    let summary: Value = serde_json::from_str(&fs::read_to_string(passed.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passthrough"], 3);
    let (a, b) = (Dataset::load(&src).unwrap(), Dataset::load(&passed).unwrap());
    for (x, y) in a.samples.iter().zip(&b.samples) {
        assert_eq!(x.cloud.points(), y.cloud.points());
    }
}

#[test]
fn sample_and_mask_reduce_clouds() {
    let d = tempdir().unwrap();
    let [src, sampled, masked] = ["src", "sampled", "masked"].map(|n| d.path().join(n));
    run_ok(&["synth", "--out", p(&src), "--n-per-class", "1", "--face-only"]);
    run_ok(&["sample", "--input", p(&src), "--out", p(&sampled), "--points", "300"]);
    let ds = Dataset::load(&sampled).unwrap();
    assert!(ds.samples.iter().all(|s| s.cloud.len() == 300));
    run_ok(&["mask", "--input", p(&sampled), "--out", p(&masked), "--mask", "glasses"]);
    let m = Dataset::load(&masked).unwrap();
    assert!(m.samples.iter().all(|s| s.cloud.len() < 300 && !s.cloud.is_empty()));
    let out = run(&["mask", "--input", p(&sampled), "--out", p(&d.path().join("bad")), "--mask", "box:0,1,0,1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn inspect_accepts_csv_and_dumps_rasters() {
    let d = tempdir().unwrap();
    let src = d.path().join("src");
    run_ok(&["synth", "--out", p(&src), "--n-per-class", "1"]);
    let cloud = facecloud::ply::read_cloud(&src.join("samples/s00000.ply")).unwrap();
    let csv: String = std::iter::once("x,y,z\n".to_string())
        .chain(cloud.points().iter().map(|q| format!("{},{},{}\n", q.x, q.y, q.z)))
        .collect();
    let input = d.path().join("head.csv");
    fs::write(&input, csv).unwrap();
    let out = d.path().join("inspect");
    run_ok(&["inspect", "--input", p(&input), "--out", p(&out), "--top", "3"]);
    for axis in ["xy", "zx"] {
        let pgm = fs::read(out.join(format!("{axis}_edges.pgm"))).unwrap();
        assert!(pgm.starts_with(b"P5\n128 "));
        let (_, rows) = read_csv(&out.join(format!("{axis}_circles.csv"))).unwrap();
        assert!(!rows.is_empty() && rows.len() <= 3);
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["report"]["eyes"].is_object());
}

#[test]
fn bandwidth_table() {
    let d = tempdir().unwrap();
    let csv = d.path().join("bw.csv");
    run_ok(&["bandwidth", "--points", "64,128,256,512,1024", "--csv", p(&csv)]);
    let (_, rows) = read_csv(&csv).unwrap();
    let ghz: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(ghz.len(), 5);
    assert!(ghz.windows(2).all(|w| w[1] > w[0]));
    assert!((ghz[0] - 6.120).abs() / 6.120 < 1e-3);
}

/// Trains, evaluates and mask-evaluates a tiny model, checking that the
/// protocol outputs agree with each other.
#[test]
fn experiment_and_mask_eval_agree() {
    let d = tempdir().unwrap();
    let cfg = write_tiny_config(d.path());
    let src = d.path().join("src");
    run_ok(&["--config", p(&cfg), "synth", "--out", p(&src), "--n-per-class", "5", "--face-only", "--pose-range", "10"]);
    let exp = d.path().join("e1");
    let common = ["--config", p(&cfg), "--seed", "6"];
    run_ok(&[&common[..], &["experiment", "--name", "E1", "--variant", "downsampled-512", "--source", p(&src), "--out", p(&exp)]].concat());
    let res: ExperimentResult = serde_json::from_str(&fs::read_to_string(exp.join("results.json")).unwrap()).unwrap();
    assert_eq!(res.n_train, 12);
    assert_eq!(res.n_infer, 3);
    assert_eq!(res.val_acc, Some(res.infer_acc));

    let csv = d.path().join("masks.csv");
    let model = exp.join("model.fpnm");
    let args = ["mask-eval", "--model", p(&model), "--data", p(&src), "--split-fraction", "0.8", "--points", "512"];
    run_ok(&[&common[..], &args, &["--masks", "glasses;hmd;box:0,0.001,0,0.001,0,0.001", "--out", p(&csv)]].concat());
    let (_, rows) = read_csv(&csv).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[0][0], "full");
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), res.infer_acc);
    assert_eq!(&rows[3][1], "failed");
    assert_eq!(&rows[3][2], "");
    assert!(rows[1][0].starts_with("glasses"));

    // A checkpoint for a different architecture is refused.
    let other = d.path().join("other.json");
    fs::write(&other, r#"{"model": {"head": [32, 3]}}"#).unwrap();
    let out = run(&["--config", p(&other), "mask-eval", "--model", p(&model), "--data", p(&src), "--out", p(&csv)]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn zero_epochs_keep_the_initialization() {
    let d = tempdir().unwrap();
    let cfg_path = write_tiny_config(d.path());
    let src = d.path().join("src");
    let c = ["--config", p(&cfg_path), "--seed", "2"];
    run_ok(&[&c[..], &["synth", "--out", p(&src), "--n-per-class", "4", "--face-only"]].concat());
    let exp = d.path().join("e1");
    run_ok(&[&c[..], &["experiment", "--name", "E1", "--source", p(&src), "--out", p(&exp), "--epochs", "0"]].concat());
    let res: ExperimentResult = serde_json::from_str(&fs::read_to_string(exp.join("results.json")).unwrap()).unwrap();

    let mut cfg = PipelineConfig::load(Some(&cfg_path)).unwrap();
    cfg.seed = 2;
    let init = init_params(&cfg.model, cfg.seed).unwrap();
    let ck = Checkpoint::load(&exp.join("model.fpnm"), &cfg.model).unwrap();
    assert_eq!(ck.params, init);
    let ds = Dataset::load(&src).unwrap();
    let labeled = ds.labeled();
    let set = Resampled { cfg: &cfg.model, clouds: &labeled };
    let (_, val) = stratified_split(&ds.labels(), 3, 0.8, cfg.seed).unwrap();
    let acc = evaluate(&init, &cfg.model, &Subset { inner: &set, indices: &val }).unwrap().accuracy;
    assert_eq!(res.infer_acc, acc);
}

#[test]
fn experiment_rejects_mismatched_datasets() {
    let d = tempdir().unwrap();
    let cfg = write_tiny_config(d.path());
    let src = d.path().join("two");
    run_ok(&["synth", "--out", p(&src), "--n-per-class", "2", "--n-classes", "2", "--face-only"]);
    let out = run(&["--config", p(&cfg), "experiment", "--name", "E1", "--source", p(&src), "--out", p(&d.path().join("o"))]);
    assert_eq!(out.status.code(), Some(4));
    let out = run(&["--config", p(&cfg), "experiment", "--name", "E1", "--source", p(&d.path().join("missing")), "--out", p(&d.path().join("o"))]);
    assert_eq!(out.status.code(), Some(4));
    let out = run(&["--config", p(&cfg), "experiment", "--name", "E6", "--fraction", "0.5", "--out", p(&d.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_and_finetune_write_their_artifacts() {
    let d = tempdir().unwrap();
    let cfg = write_tiny_config(d.path());
    let [a, b, m, f] = ["a", "b", "m", "f"].map(|n| d.path().join(n));
    let c = ["--config", p(&cfg)];
    run_ok(&[&c[..], &["synth", "--out", p(&a), "--face-only"]].concat());
    run_ok(&[&c[..], &["synth", "--out", p(&b), "--face-only", "--shifted", "--n-per-class", "4"]].concat());
    run_ok(&[&c[..], &["train", "--data", p(&a), "--out", p(&m)]].concat());
    let (_, hist) = read_csv(&m.join("history.csv")).unwrap();
    assert_eq!(hist.len(), 3);
    run_ok(&[&c[..], &["finetune", "--model", p(&m.join("model.fpnm")), "--data", p(&b), "--out", p(&f), "--epochs", "2"]].concat());
    let (_, hist) = read_csv(&f.join("history.csv")).unwrap();
    assert_eq!(hist.len(), 2);
    let rep: Value = serde_json::from_str(&fs::read_to_string(f.join("results.json")).unwrap()).unwrap();
    assert_eq!(rep["n_train"], 3);
    assert_eq!(rep["n_infer"], 9);
}

//! Black-box tests of the `pgnn` binary: exit codes, file outputs, and
//! rerun determinism.

use std::path::Path;
use std::process::{Command, Output};

fn pgnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgnn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_quick_config(dir: &Path) -> String {
    // Tiny geometry and epochs keep binary runs fast.
    let path = dir.join("config.json");
    std::fs::write(
        &path,
        r#"{
  "grid": { "height": 16, "width": 16 },
  "noise": { "circle_radius": [2, 5] },
  "train": { "epochs": 4, "eval_window": [2, 4] }
}"#,
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn gen_writes_dataset_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_quick_config(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let run = pgnn(&[
            "gen",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--n",
            "5",
            "--seed",
            "1",
        ]);
        assert!(
            run.status.success(),
            "{}",
            String::from_utf8_lossy(&run.stderr)
        );
        let stdout = String::from_utf8_lossy(&run.stdout);
        assert!(stdout.contains("manifest hash:"), "stdout: {stdout}");
    }
    for i in 0..5 {
        assert!(out_a.join(format!("images/sample_{i:05}.png")).exists());
    }
    assert_eq!(
        std::fs::read(out_a.join("labels.csv")).unwrap(),
        std::fs::read(out_b.join("labels.csv")).unwrap(),
        "labels.csv differs between identical runs"
    );
    assert!(out_a.join("effective_config.json").exists());
}

#[test]
fn gen_with_zero_samples_writes_manifest_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_quick_config(dir.path());
    let out = dir.path().join("empty");
    let run = pgnn(&[
        "gen",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--n",
        "0",
        "--seed",
        "3",
    ]);
    assert!(run.status.success());
    assert!(out.join("manifest.json").exists());
    let labels = std::fs::read_to_string(out.join("labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 1, "header only");
}

#[test]
fn train_stage2_requires_inverse_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_quick_config(dir.path());
    let data = dir.path().join("data");
    assert!(pgnn(&[
        "gen",
        "--config",
        &cfg,
        "--out",
        data.to_str().unwrap(),
        "--n",
        "8",
        "--seed",
        "2",
    ])
    .status
    .success());
    let run = pgnn(&[
        "train",
        "--config",
        &cfg,
        "--mode",
        "inverse-stage2",
        "--data",
        data.to_str().unwrap(),
        "--model-out",
        dir.path().join("m.pgnn").to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(2), "usage error expected");
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("--inverse-model"), "stderr: {stderr}");
}

#[test]
fn full_training_pipeline_produces_loadable_models() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_quick_config(dir.path());
    let data = dir.path().join("data");
    assert!(pgnn(&[
        "gen",
        "--config",
        &cfg,
        "--out",
        data.to_str().unwrap(),
        "--n",
        "15",
        "--seed",
        "4",
    ])
    .status
    .success());

    // Direct mode on a 15-sample set writes a loadable model file.
    let direct_model = dir.path().join("direct.pgnn");
    let run = pgnn(&[
        "train",
        "--config",
        &cfg,
        "--mode",
        "direct",
        "--data",
        data.to_str().unwrap(),
        "--model-out",
        direct_model.to_str().unwrap(),
        "--train-size",
        "10",
        "--seed",
        "5",
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    pgnn::models::load_model(&direct_model).expect("direct model loads");
    let metrics = dir.path().join("metrics.csv");
    assert!(metrics.exists());

    // Stage 1 emits a loss trace with one row per epoch.
    let inv_model = dir.path().join("inverse.pgnn");
    let run = pgnn(&[
        "train",
        "--config",
        &cfg,
        "--mode",
        "inverse-stage1",
        "--data",
        data.to_str().unwrap(),
        "--model-out",
        inv_model.to_str().unwrap(),
        "--train-size",
        "10",
        "--seed",
        "6",
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let trace = std::fs::read_to_string(dir.path().join("loss_trace.csv")).unwrap();
    assert_eq!(
        trace.lines().count(),
        1 + 4,
        "header plus one row per epoch"
    );

    // Stage 2 consumes the stage-1 model.
    let stage2_model = dir.path().join("stage2.pgnn");
    let run = pgnn(&[
        "train",
        "--config",
        &cfg,
        "--mode",
        "inverse-stage2",
        "--data",
        data.to_str().unwrap(),
        "--model-out",
        stage2_model.to_str().unwrap(),
        "--inverse-model",
        inv_model.to_str().unwrap(),
        "--train-size",
        "10",
        "--seed",
        "7",
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    pgnn::models::load_model(&stage2_model).expect("stage-2 model loads");
}

#[test]
fn bench_emits_rows_and_is_rerun_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_quick_config(dir.path());
    let out_a = dir.path().join("report_a");
    let out_b = dir.path().join("report_b");
    for out in [&out_a, &out_b] {
        let run = pgnn(&[
            "bench",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--train-sizes",
            "6",
            "--reps",
            "1",
            "--test-size",
            "6",
            "--seed",
            "9",
        ]);
        assert!(
            run.status.success(),
            "{}",
            String::from_utf8_lossy(&run.stderr)
        );
    }
    let rows = std::fs::read_to_string(out_a.join("rows.csv")).unwrap();
    assert_eq!(
        rows.lines().count(),
        1 + 2,
        "header plus direct and pgnn rows"
    );
    assert!(rows.starts_with("model,train_size,rep,rmse,mae,r2,se"));
    assert_eq!(
        std::fs::read(out_a.join("rows.csv")).unwrap(),
        std::fs::read(out_b.join("rows.csv")).unwrap(),
        "rows.csv differs between identical runs"
    );
    for f in [
        "summary.csv",
        "summary.json",
        "curves.csv",
        "effective_config.json",
    ] {
        assert!(out_a.join(f).exists(), "{f} missing");
    }
}

#[test]
fn verify_passes_and_fault_injection_fails_naming_conv2d() {
    let ok = pgnn(&["verify", "--seed", "1"]);
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stdout)
    );

    let bad = pgnn(&["verify", "--seed", "1", "--inject-conv-fault"]);
    assert_eq!(bad.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&bad.stdout);
    let stderr = String::from_utf8_lossy(&bad.stderr);
    assert!(
        stdout.contains("FAIL grad/conv2d") && stderr.contains("conv2d"),
        "offender not named: {stdout} {stderr}"
    );
}

#[test]
fn unknown_config_keys_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{ "grd": { "height": 16 } }"#).unwrap();
    let run = pgnn(&[
        "gen",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("x").to_str().unwrap(),
        "--n",
        "1",
    ]);
    assert_eq!(run.status.code(), Some(2));
}

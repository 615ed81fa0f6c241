use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_zeromode"))
}

fn dataset() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/optdigits.csv")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

/// Tiny training run shared by several checks.
fn train_small(dir: &Path, extra: &[&str]) -> Output {
    let ds = dataset();
    let mut args = vec![
        "train",
        "--dataset",
        ds.to_str().unwrap(),
        "--total",
        "8",
        "--budget",
        "3",
        "--seed",
        "5",
        "--out-dir",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn missing_dataset_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["train", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&run(&["train", "--no-such-flag"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn unreadable_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "train",
        "--dataset",
        "/nonexistent/optdigits.csv",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn train_evaluate_and_rerun_reproduce_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let o = train_small(&a, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "model.json",
        "training_log.csv",
        "split.csv",
        "train_manifest.json",
        "train_summary.json",
    ] {
        assert!(a.join(f).exists(), "{f} missing");
    }
    let log = read(a.join("training_log.csv"));
    assert_eq!(
        log.lines().next(),
        Some("evaluation,temperature,current_cost,best_cost")
    );
    assert!(log.lines().count() <= 4);

    let b = dir.path().join("b");
    let o = run(&[
        "rerun",
        "--manifest",
        a.join("train_manifest.json").to_str().unwrap(),
        "--out-dir",
        b.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["model.json", "training_log.csv", "split.csv", "train_summary.json"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f} differs");
    }

    let ds = dataset();
    let o = run(&[
        "evaluate",
        "--dataset",
        ds.to_str().unwrap(),
        "--out-dir",
        a.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let metrics: serde_json::Value = serde_json::from_str(&read(a.join("metrics.json"))).unwrap();
    for part in ["train", "test"] {
        let acc = metrics[part]["accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }
    let preds = read(a.join("predictions_test.csv"));
    assert_eq!(preds.lines().count(), 1 + 2);
}

#[test]
fn budget_one_warns() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset();
    let o = run(&[
        "train",
        "--dataset",
        ds.to_str().unwrap(),
        "--total",
        "8",
        "--budget",
        "1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    assert_eq!(read(dir.path().join("training_log.csv")).lines().count(), 2);
}

#[test]
fn spectrum_classify_and_delta_override() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&train_small(dir.path(), &[])), 0);
    let ds = dataset();
    let out = dir.path().to_str().unwrap();
    let common = ["--dataset", ds.to_str().unwrap(), "--out-dir", out, "--image-id", "0"];

    let o = bin().arg("spectrum").args(common).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path().join("spectrum_0.csv"));
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 64);
    assert_eq!(rows.iter().filter(|r| r[5] == "1").count(), 1);
    let lasing_selected = rows.iter().find(|r| r[5] == "1").unwrap()[4] == "1";
    assert_eq!(read(dir.path().join("pump_0.csv")).lines().count(), 65);

    let o = bin().arg("classify").args(common).output().unwrap();
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["lasing_selected"].as_bool().unwrap(), lasing_selected);
    assert_eq!(v["answer"] == "yes", v["gap"].as_f64().unwrap() > 0.0);

    // Everything selected with a huge cutoff.
    let o = bin()
        .arg("spectrum")
        .args(common)
        .args(["--delta", "100"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let csv = read(dir.path().join("spectrum_0.csv"));
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(4) == Some("1")));

    let o = bin()
        .arg("classify")
        .args([
            "--dataset",
            ds.to_str().unwrap(),
            "--out-dir",
            out,
            "--image-id",
            "999999",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn mode_stats_and_noise_sweep() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&train_small(dir.path(), &[])), 0);
    let ds = dataset();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "mode-stats",
        "--dataset",
        ds.to_str().unwrap(),
        "--out-dir",
        out,
        "--on",
        "all",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(dir.path().join("mode_stats.csv")).lines().count(), 1 + 8);
    assert_eq!(read(dir.path().join("lasing_histogram.csv")).lines().count(), 1 + 64);

    let o = run(&[
        "noise-sweep",
        "--dataset",
        ds.to_str().unwrap(),
        "--out-dir",
        out,
        "--on",
        "all",
        "--noise-levels",
        "0,1",
        "--realizations",
        "3",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path().join("noise_sweep.csv"));
    let first: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[2].parse::<f64>().unwrap(), 0.0);
    assert_eq!(first[3], "3");
}

#[test]
fn blank_single_image_dataset_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&train_small(dir.path(), &[])), 0);
    let blank = dir.path().join("blank.csv");
    std::fs::write(&blank, format!("{}7\n", "0,".repeat(64))).unwrap();
    let stats = dir.path().join("stats");
    let o = run(&[
        "mode-stats",
        "--dataset",
        blank.to_str().unwrap(),
        "--model",
        dir.path().join("model.json").to_str().unwrap(),
        "--out-dir",
        stats.to_str().unwrap(),
        "--on",
        "all",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(stats.join("mode_stats.csv")).lines().count(), 2);
}

#[test]
fn empty_split_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&train_small(dir.path(), &[])), 0);
    let split = dir.path().join("empty.csv");
    std::fs::write(&split, "id,label,split\n").unwrap();
    let ds = dataset();
    let o = run(&[
        "evaluate",
        "--dataset",
        ds.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--split",
        split.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    std::fs::write(&split, "").unwrap();
    let o = run(&[
        "evaluate",
        "--dataset",
        ds.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--split",
        split.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            "dataset = {:?}\ntotal = 8\nbudget = 2\nseed = 3\ndelta = 0.5\nbounds = [-2.0, 2.0]\n",
            ds.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = run(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--delta",
        "0.25",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let model: serde_json::Value = serde_json::from_str(&read(dir.path().join("model.json"))).unwrap();
    assert_eq!(model["delta"].as_f64(), Some(0.25));
    assert_eq!(model["provenance"]["budget"].as_u64(), Some(2));
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path().join("train_manifest.json"))).unwrap();
    assert_eq!(manifest["settings"]["bounds"], serde_json::json!([-2.0, 2.0]));

    std::fs::write(&config, "not_a_key = 1\n").unwrap();
    let o = run(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

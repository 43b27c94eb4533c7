//! Command-level contract tests: exit codes, config-file merging, and the
//! shapes of the emitted reports.

use std::path::Path;
use std::process::{Command, Output};

fn mga(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mga"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn gen_dataset(dir: &Path) -> (String, String) {
    let data = dir.join("data").to_string_lossy().to_string();
    let out = mga(&[
        "gen", "--out", &data, "--gen-n", "60", "--gen-k", "2", "--p-in", "0.4", "--p-out",
        "0.02", "--seed", "3",
    ]);
    assert!(out.status.success());
    (format!("{data}/edges.tsv"), format!("{data}/labels.tsv"))
}

#[test]
fn missing_label_file_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, _) = gen_dataset(dir.path());
    let out = mga(&[
        "train",
        "--out",
        &dir.path().join("t").to_string_lossy(),
        "--edges",
        &edges,
        "--labels",
        "/nonexistent/labels.tsv",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("/nonexistent/labels.tsv"),
        "stderr should name the path: {stderr}"
    );
}

#[test]
fn conflicting_dataset_sources_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, labels) = gen_dataset(dir.path());
    let out = mga(&[
        "train",
        "--out",
        &dir.path().join("t").to_string_lossy(),
        "--edges",
        &edges,
        "--labels",
        &labels,
        "--gen-n",
        "10",
        "--gen-k",
        "2",
        "--p-in",
        "0.5",
        "--p-out",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generator_config_reaches_high_test_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let trained = dir.path().join("train").to_string_lossy().to_string();
    let out = mga(&[
        "train", "--out", &trained, "--gen-n", "200", "--gen-k", "2", "--p-in", "0.1",
        "--p-out", "0.01", "--seed", "1",
    ]);
    assert!(out.status.success());
    let metrics: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(format!("{trained}/train_metrics.json")).unwrap(),
    )
    .unwrap();
    let acc = metrics["test_accuracy"].as_f64().unwrap();
    assert!(acc > 0.9, "test accuracy {acc}");
    assert!(metrics["config_hash"].as_str().unwrap().len() == 64);
}

#[test]
fn config_file_supplies_flags_and_cli_wins() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, labels) = gen_dataset(dir.path());
    let cfg_path = dir.path().join("run.conf");
    std::fs::write(
        &cfg_path,
        format!(
            "# experiment defaults\nedges = {edges}\nlabels = {labels}\nseed = 3\nepochs = 40\n"
        ),
    )
    .unwrap();
    let out_a = dir.path().join("a").to_string_lossy().to_string();
    let out = mga(&["train", "--config", &cfg_path.to_string_lossy(), "--out", &out_a]);
    assert!(out.status.success());
    let metrics: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(format!("{out_a}/train_metrics.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(metrics["config"]["train"]["epochs"].as_u64(), Some(40));

    // An explicit flag overrides the file value.
    let out_b = dir.path().join("b").to_string_lossy().to_string();
    let out = mga(&[
        "train", "--config", &cfg_path.to_string_lossy(), "--out", &out_b, "--epochs", "55",
    ]);
    assert!(out.status.success());
    let metrics: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(format!("{out_b}/train_metrics.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(metrics["config"]["train"]["epochs"].as_u64(), Some(55));
}

#[test]
fn attack_report_has_curve_and_replayable_perturbations() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, labels) = gen_dataset(dir.path());
    let trained = dir.path().join("train").to_string_lossy().to_string();
    assert!(mga(&[
        "train", "--out", &trained, "--edges", &edges, "--labels", &labels, "--seed", "3"
    ])
    .status
    .success());
    let attacked = dir.path().join("attack").to_string_lossy().to_string();
    assert!(mga(&[
        "attack", "--out", &attacked, "--edges", &edges, "--labels", &labels, "--model",
        &format!("{trained}/model.bin"), "--budget", "6", "--count", "2", "--seed", "3",
    ])
    .status
    .success());

    let curve = std::fs::read_to_string(format!("{attacked}/asr_curve.csv")).unwrap();
    let mut lines = curve.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "budget,asr");
    assert_eq!(curve.lines().count(), 2 + 6);

    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(format!("{attacked}/report.json")).unwrap(),
    )
    .unwrap();
    let targets = report["targets"].as_array().unwrap();
    assert_eq!(targets.len(), 4);
    for t in targets {
        let id = t["target"].as_u64().unwrap();
        assert!(Path::new(&format!("{attacked}/perturbations/target_{id}.tsv")).is_file());
    }
}

#[test]
fn analyze_rejects_corrupt_perturbation_naming_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, labels) = gen_dataset(dir.path());
    let trained = dir.path().join("train").to_string_lossy().to_string();
    assert!(mga(&[
        "train", "--out", &trained, "--edges", &edges, "--labels", &labels, "--seed", "3"
    ])
    .status
    .success());
    let attacked = dir.path().join("attack").to_string_lossy().to_string();
    assert!(mga(&[
        "attack", "--out", &attacked, "--edges", &edges, "--labels", &labels, "--model",
        &format!("{trained}/model.bin"), "--budget", "4", "--count", "1", "--seed", "3",
    ])
    .status
    .success());

    // Corrupt the second data line of one perturbation file.
    let pert_dir = format!("{attacked}/perturbations");
    let victim = std::fs::read_dir(&pert_dir).unwrap().next().unwrap().unwrap().path();
    let mut lines: Vec<String> =
        std::fs::read_to_string(&victim).unwrap().lines().map(String::from).collect();
    assert!(lines.len() >= 3);
    lines[2] = "2\t0\t1\tadd\tnot-a-number\t0".into();
    std::fs::write(&victim, lines.join("\n")).unwrap();

    let out = mga(&["analyze", "--report-dir", &attacked, "--out", &attacked]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let name = victim.file_name().unwrap().to_string_lossy().to_string();
    assert!(stderr.contains(&name), "stderr should name the file: {stderr}");
    assert!(stderr.contains(":3"), "stderr should name the line: {stderr}");
}

#[test]
fn deceive_reports_table_shape_and_budget_bound() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, _) = gen_dataset(dir.path());
    let out_dir = dir.path().join("dec").to_string_lossy().to_string();
    assert!(mga(&[
        "deceive", "--out", &out_dir, "--edges", &edges, "--budget", "10", "--count", "2",
        "--seed", "3", "--epochs", "120",
    ])
    .status
    .success());
    let csv = std::fs::read_to_string(format!("{out_dir}/deception.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "detector,method,mode,asr,aml");
    let row = lines.next().unwrap();
    assert!(row.starts_with("lpa,mga,unlimited,"));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(format!("{out_dir}/deception.json")).unwrap(),
    )
    .unwrap();
    let aml = report["aml"].as_f64().unwrap();
    assert!((1.0..=10.0).contains(&aml));
    assert!(Path::new(&format!("{out_dir}/partition.tsv")).is_file());
}

#[test]
fn ablation_grid_emits_six_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, labels) = gen_dataset(dir.path());
    let trained = dir.path().join("train").to_string_lossy().to_string();
    assert!(mga(&[
        "train", "--out", &trained, "--edges", &edges, "--labels", &labels, "--seed", "3"
    ])
    .status
    .success());
    let out_dir = dir.path().join("abl").to_string_lossy().to_string();
    assert!(mga(&[
        "ablate-knowledge", "--out", &out_dir, "--edges", &edges, "--labels", &labels,
        "--model", &format!("{trained}/model.bin"), "--budget", "4", "--seed", "3",
    ])
    .status
    .success());
    let csv = std::fs::read_to_string(format!("{out_dir}/ablation.csv")).unwrap();
    // hash comment + header + 6 grid rows
    assert_eq!(csv.lines().count(), 8);
    assert_eq!(csv.lines().nth(1).unwrap(), "mode,p_miss,asr,aml");
}

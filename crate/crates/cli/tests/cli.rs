use std::path::Path;
use std::process::{Command, Output};

use advjudge_core::dataset::{write_mnist_idx, LabeledImageSet};
use advjudge_core::Image;

fn advjudge(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_advjudge"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

/// Ten classes of 12x12 digits-in-spirit: class k lights rows 1+k.
fn striped(n: usize, phase: usize) -> LabeledImageSet<f32> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let label = i % 10;
        let px = (0..144)
            .map(|j| {
                let jitter = ((i * 31 + j * 17 + phase) % 23) as f32 / 115.0;
                let lit = j / 12 == label + 1;
                if lit { 0.75 + jitter } else { jitter }
            })
            .collect();
        images.push(Image::new(1, 12, 12, px).unwrap());
        labels.push(label);
    }
    LabeledImageSet::new(images, labels, 10).unwrap()
}

fn write_data(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    write_mnist_idx(&striped(300, 0), &dir.join("train-images-idx3-ubyte"), &dir.join("train-labels-idx1-ubyte"))
        .unwrap();
    write_mnist_idx(&striped(150, 7), &dir.join("t10k-images-idx3-ubyte"), &dir.join("t10k-labels-idx1-ubyte"))
        .unwrap();
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr has a line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

#[test]
fn smoke_run_all_then_single_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("digits");
    write_data(&data);
    let data_s = data.to_str().unwrap();
    let out = tmp.path().join("run");
    let out_s = out.to_str().unwrap();
    let common = [
        "--preset", "smoke", "--dataset", "mnist", "--data-dir", data_s, "--seed", "3", "--out", out_s,
        "--judge-epochs", "5", "--attribution-steps", "10", "--quiet",
    ];

    let mut args = vec!["run-all"];
    args.extend(common);
    let r = advjudge(&args, tmp.path());
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let manifests: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(manifests.as_array().unwrap().len(), 7);
    for f in ["report.json", "roc.svg", "roc.csv", "feature_importance.svg", "config.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }

    // The stored config reproduces the run from another directory.
    let cfg = out.join("config.json");
    let mut args = vec!["evaluate", "--config", cfg.to_str().unwrap(), "--out", out_s, "--quiet"];
    let r = advjudge(&args, tmp.path());
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let m: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(m["stage"], "evaluate");

    // A different seed in the same directory is refused.
    args.extend(["--seed", "4"]);
    let r = advjudge(&args, tmp.path());
    assert!(!r.status.success());
    let e = stderr_json(&r);
    assert_eq!(e["stage"], "evaluate");
    assert_eq!(e["kind"], "invalid-argument");
}

#[test]
fn errors_are_json() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("empty");
    let r = advjudge(&["train-judge", "--out", out.to_str().unwrap(), "--quiet"], tmp.path());
    assert_eq!(r.status.code(), Some(1));
    let e = stderr_json(&r);
    assert_eq!(e["stage"], "train-judge");
    assert!(e["message"].as_str().unwrap().contains("score"));

    let r = advjudge(&["frobnicate"], tmp.path());
    assert_eq!(r.status.code(), Some(2));
    assert_eq!(stderr_json(&r)["kind"], "usage");

    let r = advjudge(&["run-all", "--quiet"], tmp.path());
    assert!(!r.status.success());
    assert!(stderr_json(&r)["message"].as_str().unwrap().contains("output directory"));

    let r = advjudge(&["show-config", "--preset", "smoke", "--seed", "9"], tmp.path());
    assert!(r.status.success());
    let cfg: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(cfg["seed"], 9);
    assert_eq!(cfg["sweep"], false);
}

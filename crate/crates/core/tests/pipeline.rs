mod common;

use std::fs;
use std::path::Path;

use advjudge_core::dataset::write_mnist_idx;
use advjudge_core::pipeline::{
    manifest_path, stage_status, DatasetConfig, DatasetKind, ExperimentConfig, Runner, Stage, StageStatus, JUDGE_NAME,
    REPORT_FILE, TIMINGS_FILE,
};

fn synthetic_mnist(dir: &Path) {
    let train = common::banded_set(300, 10, 12, 11);
    let test = common::banded_set(160, 10, 12, 12);
    write_mnist_idx(&train, &dir.join("train-images-idx3-ubyte"), &dir.join("train-labels-idx1-ubyte")).unwrap();
    write_mnist_idx(&test, &dir.join("t10k-images-idx3-ubyte"), &dir.join("t10k-labels-idx1-ubyte")).unwrap();
}

fn tiny_config(data: &Path, out: &Path) -> ExperimentConfig {
    let ds = DatasetConfig {
        kind: DatasetKind::Mnist,
        dir: data.to_path_buf(),
        train_limit: None,
    };
    let mut cfg = ExperimentConfig::smoke(ds, 5, out.to_path_buf());
    cfg.split.adv_train_per_attack = 12;
    cfg.split.adv_test_per_attack = 4;
    cfg.sweep = true;
    cfg.judge.epochs = 10;
    cfg.attribution_steps = 20;
    cfg
}

/// Every file of a run directory except the wall-clock timings.
fn bundle(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != TIMINGS_FILE {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn end_to_end_resume_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    fs::create_dir(&data).unwrap();
    synthetic_mnist(&data);

    let a = tmp.path().join("a");
    let runner = Runner::new(tiny_config(&data, &a)).unwrap().quiet(true);
    let manifests = runner.run_all().unwrap();
    assert_eq!(manifests.len(), Stage::ALL.len());

    let report = runner.report().unwrap();
    assert_eq!(report.detectors.len(), 10);
    assert_eq!(report.sweep.len(), 39);
    assert_eq!(report.samples.train_benign, 80);
    assert_eq!(report.samples.test_benign, 20);
    let judge = report.judge().unwrap();
    assert_eq!(judge.name, JUDGE_NAME);
    assert!((0.0..=1.0).contains(&judge.auc));
    for name in ["roc.svg", "feature_importance.svg", "attributions.csv", "case_studies.json", "sweep.csv"] {
        assert!(a.join(name).is_file(), "{name} missing");
    }
    let text = fs::read_to_string(a.join(REPORT_FILE)).unwrap();
    assert!(text.contains(runner.config_hash()));

    // Everything complete: a second run_all does nothing.
    let again = runner.run_all().unwrap();
    assert_eq!(again, manifests);

    // Rerunning a stage drops the manifests downstream of it.
    runner.run(Stage::FitThreshold).unwrap();
    assert!(!manifest_path(&a, "evaluate").exists());
    assert!(manifest_path(&a, "train-judge").exists());
    runner.run_all().unwrap();

    // A different seed may not resume in the same directory.
    let mut other = tiny_config(&data, &a);
    other.seed = 6;
    let err = Runner::new(other).unwrap().quiet(true).run(Stage::Evaluate).unwrap_err();
    assert_eq!(err.kind(), "invalid-argument");

    // Tampering with an output marks the stage stale.
    let thresholds = a.join("thresholds.json");
    let original = fs::read(&thresholds).unwrap();
    fs::write(&thresholds, b"{}").unwrap();
    assert_eq!(stage_status(&a, "fit-threshold", runner.config_hash()).unwrap(), StageStatus::Stale);
    assert!(runner.run(Stage::Evaluate).is_err());
    fs::write(&thresholds, original).unwrap();

    // Same config and seed elsewhere: identical bytes.
    let b = tmp.path().join("b");
    Runner::new(tiny_config(&data, &b)).unwrap().quiet(true).run_all().unwrap();
    let (ba, bb) = (bundle(&a), bundle(&b));
    assert_eq!(ba.iter().map(|f| &f.0).collect::<Vec<_>>(), bb.iter().map(|f| &f.0).collect::<Vec<_>>());
    for (fa, fb) in ba.iter().zip(&bb) {
        assert!(fa.1 == fb.1, "{} differs between runs", fa.0);
    }
}

#[test]
fn stage_needs_its_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let runner = Runner::new(tiny_config(tmp.path(), &tmp.path().join("run"))).unwrap().quiet(true);
    let err = runner.run(Stage::Score).unwrap_err();
    assert!(err.to_string().contains("score"), "{err}");
    let err = runner.run(Stage::TrainClassifier).unwrap_err();
    assert_eq!(err.kind(), "io-error");
}

//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 6 to 9 read a protocol-sized run cached in
//! `target/acceptance-desk` (or `$ADVJUDGE_DESK_DIR`); a missing or partial
//! run is completed first, which takes a while on one core. Criterion 11
//! runs the smoke configuration twice.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use advjudge_core::attribution::integrated_gradients;
use advjudge_core::classifier::Architecture;
use advjudge_core::detector::{fit_threshold, judge_architecture, kl_divergence, read_scores_csv, JudgeModel};
use advjudge_core::metrics::{f1_score, roc_curve};
use advjudge_core::numerics::{Activation, LayerSpec};
use advjudge_core::pipeline::{DatasetConfig, DatasetKind, ExperimentConfig, Report, Runner, TIMINGS_FILE};
use advjudge_core::transforms::{
    bit_depth_reduce, dct2, feature_filter, idct2, transform, FlipAxis, TransformSpec, SUITE_LEN,
};
use advjudge_core::{Image, Network, ProbVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DESK_SEED: u64 = 1;
const SMOKE_SEED: u64 = 11;

type Verdict = Result<String, String>;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .expect("workspace root")
}

fn check(cond: bool, detail: String) -> Verdict {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ac1_kl() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut self_worst) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(2..=16);
        let mut draw = || {
            let raw: Vec<f64> = (0..n)
                .map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random::<f64>() })
                .collect();
            let t: f64 = raw.iter().sum();
            if t == 0.0 { vec![1.0 / n as f64; n] } else { raw.iter().map(|v| v / t).collect::<Vec<_>>() }
        };
        let (p, q) = (draw(), draw());
        let (pv, qv) = (ProbVector::new(p.clone()).unwrap(), ProbVector::new(q.clone()).unwrap());
        worst = worst.max((kl_divergence(&pv, &qv).unwrap() - common::kl_oracle(&p, &q)).abs());
        self_worst = self_worst.max(kl_divergence(&pv, &pv).unwrap().abs());
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-9 && self_worst == 0.0 && secs < 1.0,
        format!("max |kl - oracle| = {worst:.2e}, max |kl(p,p)| = {self_worst:e}, {secs:.3} s"),
    )
}

fn ac2_gradients() -> Verdict {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for shape in [[1usize, 28, 28], [3, 32, 32]] {
        let net = Network::<f64>::new(&shape, &Architecture::Desk.layers(10), 3).unwrap();
        let x: Vec<f64> = (0..shape.iter().product::<usize>()).map(|_| rng.random()).collect();
        let r = common::check_gradients(&net, &x, 4, 1e-4, 120, 5);
        ok &= r.checked >= 100 && r.max_rel_error <= 1e-5;
        lines.push(format!("desk cnn {shape:?}: {} coords, max rel {:.1e}", r.checked, r.max_rel_error));
    }
    let net = Network::<f64>::new(&[SUITE_LEN], &judge_architecture(), 6).unwrap();
    let v: Vec<f64> = (0..SUITE_LEN).map(|_| rng.random_range(0.0..2.0)).collect();
    let r = common::check_gradients(&net, &v, 0, 1e-4, 120, 7);
    ok &= r.checked >= 100 && r.max_rel_error <= 1e-5;
    lines.push(format!("judge: {} coords, max rel {:.1e}", r.checked, r.max_rel_error));
    let secs = start.elapsed().as_secs_f64();
    check(ok && secs < 60.0, format!("{}; {secs:.1} s", lines.join("; ")))
}

fn ac3_dct() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut naive, mut round) = (0.0f64, 0.0f64);
    let mut sizes: Vec<(usize, usize)> = (1..=8).flat_map(|r| (1..=8).map(move |c| (r, c))).collect();
    sizes.extend([(32, 32), (28, 28), (17, 5)]);
    for (r, c) in sizes {
        let x: Vec<f64> = (0..r * c).map(|_| rng.random()).collect();
        let d = dct2(&x, r, c).unwrap();
        if r <= 8 && c <= 8 {
            let o = common::naive_dct2(&x, r, c);
            naive = naive.max(d.iter().zip(&o).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        let back = idct2(&d, r, c).unwrap();
        round = round.max(back.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    check(
        naive <= 1e-6 && round <= 1e-6,
        format!("max vs naive {naive:.1e}, max round trip {round:.1e}"),
    )
}

fn max_diff(a: &Image<f64>, b: &Image<f64>) -> f64 {
    a.pixels().iter().zip(b.pixels()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn ac4_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let im = Image::new(3, 9, 7, (0..3 * 63).map(|_| rng.random()).collect()).unwrap();
    let flips_exact = [FlipAxis::Horizontal, FlipAxis::Vertical, FlipAxis::Both].iter().all(|&axis| {
        let s = TransformSpec::Flip { axis };
        transform(&transform(&im, &s, 0).unwrap(), &s, 0).unwrap() == im
    });
    let rot = max_diff(&transform(&im, &TransformSpec::Rotation { degrees: 0.0 }, 0).unwrap(), &im);
    let tr = max_diff(&transform(&im, &TransformSpec::Translation { offset: [0, 0] }, 0).unwrap(), &im);
    let ff = max_diff(&feature_filter(&im, 1.0).unwrap(), &im);
    let ends = Image::new(1, 1, 2, vec![0.0, 1.0]).unwrap();
    let bits = (1..=8).map(|b| max_diff(&bit_depth_reduce(&ends, b).unwrap(), &ends)).fold(0.0, f64::max);
    check(
        flips_exact && rot <= 1e-6 && tr <= 1e-6 && ff <= 1e-6 && bits <= 1e-6,
        format!("flip twice exact: {flips_exact}; rotation 0: {rot:.1e}; translation [0,0]: {tr:.1e}; feature filter r=1: {ff:.1e}; bit depth at 0/1: {bits:.1e}"),
    )
}

fn ac5_threshold() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for _ in 0..100 {
        let nb = rng.random_range(1..=100);
        let na = rng.random_range(1..=100);
        let grid = rng.random_range(3..50) as f64;
        let mut draw = |n: usize, shift: f64| -> Vec<f64> {
            (0..n).map(|_| ((rng.random::<f64>() + shift) * grid).floor() / grid).collect()
        };
        let (b, a) = (draw(nb, 0.0), draw(na, 0.3));
        let fit = fit_threshold(&b, &a).unwrap();
        let (t, product) = common::brute_force_threshold(&b, &a);
        if fit.threshold != t || fit.tpr * fit.tnr != product {
            mismatches += 1;
        }
    }
    check(mismatches == 0, format!("{mismatches} of 100 instances differ from brute force"))
}

fn ac10_metrics() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(2..400);
        let mut scores: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 20.0).floor()).collect();
        let mut truths: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        scores.push(1.0);
        truths.push(true);
        scores.push(2.0);
        truths.push(false);
        let a = roc_curve(&scores, &truths).unwrap().auc;
        worst = worst.max((a - common::mann_whitney_auc(&scores, &truths)).abs());
    }
    let f1 = f1_score(0.92, 0.94);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let scores: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
    let truths: Vec<bool> = (0..2000).map(|_| rng.random_bool(0.5)).collect();
    let random = roc_curve(&scores, &truths).unwrap().auc;
    check(
        worst <= 1e-9 && (f1 - 0.92989).abs() <= 1e-5 && (0.47..=0.53).contains(&random),
        format!("max |auc - mann-whitney| {worst:.1e}; f1(0.92, 0.94) = {f1:.6}; random auc {random:.4}"),
    )
}

fn desk_runner() -> Result<Runner, String> {
    let root = root();
    let dir = std::env::var_os("ADVJUDGE_DESK_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| root.join("target/acceptance-desk"));
    let cfg = ExperimentConfig::desk(DatasetConfig::locate(&root), DESK_SEED, dir);
    let runner = Runner::new(cfg).map_err(|e| e.to_string())?;
    runner.run_all().map_err(|e| format!("desk run failed: {e}"))?;
    Ok(runner)
}

fn ac6_attacks(runner: &Runner, report: &Report) -> Verdict {
    let by: BTreeMap<&str, _> = report.attacks.iter().map(|a| (a.method.as_str(), a)).collect();
    let (fgsm, bim, cw) = (by["fgsm"], by["bim"], by["cw"]);
    let times: BTreeMap<String, f64> =
        serde_json::from_str(&fs::read_to_string(runner.out_dir().join(TIMINGS_FILE)).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let attack_secs = times.get("attack").copied().unwrap_or(f64::NAN);
    let figures = format!(
        "{}: fgsm success {:.3}, bim {:.3}, cw {:.3}; mean L2 cw {:.3} vs bim {:.3}; attack stage {:.0} s",
        report.dataset, fgsm.success_rate, bim.success_rate, cw.success_rate, cw.mean_l2, bim.mean_l2, attack_secs
    );
    let holds = fgsm.success_rate >= 0.5
        && bim.success_rate >= fgsm.success_rate
        && cw.success_rate >= 0.9
        && cw.mean_l2 < bim.mean_l2
        && attack_secs <= 1800.0;
    if runner.config().dataset.kind != DatasetKind::Cifar10 {
        return Err(format!("CIFAR-10 not available, criterion is stated for it; {figures}"));
    }
    check(holds, figures)
}

fn ac7_integrated_gradients(runner: &Runner) -> Verdict {
    let model = runner.load_judge().map_err(|e| e.to_string())?;
    let path = runner.out_dir().join("scores.csv");
    let rows = read_scores_csv(fs::File::open(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let baseline = [0.0; SUITE_LEN];
    let (mut worst, mut worst_abs, mut n, mut within) = (0.0f64, 0.0f64, 0, 0);
    for r in rows.iter().filter(|r| r.image_id.starts_with("test/")).take(100) {
        let ig = integrated_gradients(&model, &r.scores, &baseline, 200).map_err(|e| e.to_string())?;
        let delta = (ig.output - ig.baseline_output).abs();
        // Relative to the output change, with an absolute floor of 1e-4 for
        // inputs the judge scores like the baseline.
        let rel = ig.completeness_gap / delta.max(1e-4);
        worst = worst.max(rel);
        worst_abs = worst_abs.max(ig.completeness_gap);
        within += usize::from(rel <= 0.01);
        n += 1;
    }
    let mut linear = Network::<f64>::zeroed(&[SUITE_LEN], &[LayerSpec::Dense { outputs: 1, activation: Activation::None }])
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for p in linear.params_mut() {
        p.iter_mut().for_each(|w| *w = rng.random_range(-2.0..2.0));
    }
    let linear = JudgeModel::from_network(linear).unwrap();
    let mut linear_gap = 0.0f64;
    for _ in 0..100 {
        let v: Vec<f64> = (0..SUITE_LEN).map(|_| rng.random_range(0.0..3.0)).collect();
        linear_gap = linear_gap.max(integrated_gradients(&linear, &v, &baseline, 200).unwrap().completeness_gap);
    }
    check(
        n == 100 && worst <= 0.01 && linear_gap <= 1e-9,
        format!(
            "{within}/{n} trained-judge inputs within 1%, worst relative gap {worst:.2e}, worst absolute {worst_abs:.2e}; linear judge gap {linear_gap:.1e}"
        ),
    )
}

fn ac8_headline(report: &Report) -> Verdict {
    let j = report.judge().ok_or("no judge row")?;
    let best = report.individual().max_by(|a, b| a.f1.total_cmp(&b.f1)).ok_or("no individual rows")?;
    let best_auc = report.individual().max_by(|a, b| a.auc.total_cmp(&b.auc)).unwrap();
    check(
        j.f1 >= best.f1 + 0.02 && j.auc > best_auc.auc,
        format!(
            "{}: judge f1 {:.4} auc {:.4}; best individual f1 {:.4} ({}), best auc {:.4} ({})",
            report.dataset, j.f1, j.auc, best.f1, best.name, best_auc.auc, best_auc.name
        ),
    )
}

fn ac9_separation(report: &Report) -> Verdict {
    let mut separated = Vec::new();
    for s in &report.separation {
        if s.median["benign"] < s.median["cw"] {
            separated.push(s.transform.as_str());
        }
    }
    check(
        separated.len() >= 6,
        format!("median benign < median cw for {}/9: {}", separated.len(), separated.join(", ")),
    )
}

/// All files of a run directory except timings, relative path to bytes.
fn bundle(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != TIMINGS_FILE {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn ac11_determinism() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dataset = DatasetConfig::locate(&root());
    let mut bundles = Vec::new();
    for name in ["first", "second"] {
        let cfg = ExperimentConfig::smoke(dataset.clone(), SMOKE_SEED, tmp.path().join(name));
        Runner::new(cfg)
            .and_then(|r| r.quiet(true).run_all())
            .map_err(|e| format!("smoke run failed: {e}"))?;
        bundles.push(bundle(&tmp.path().join(name)));
    }
    let differing: Vec<&String> = bundles[0]
        .iter()
        .filter(|(k, v)| bundles[1].get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    check(
        differing.is_empty() && bundles[0].len() == bundles[1].len(),
        format!("{} files compared, differing: {differing:?}", bundles[0].len()),
    )
}

fn run(id: &str, what: &str, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("{id} {tag} {what} [{secs:.1} s] {detail}");
    outcome.is_ok()
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |id: &str| filter.is_empty() || filter.iter().any(|f| f == id);
    let mut results = Vec::new();
    let mut go = |id: &'static str, what: &str, f: &mut dyn FnMut() -> Verdict| {
        if wanted(id) {
            results.push((id, run(id, what, f)));
        }
    };

    go("AC1", "kl oracle", &mut ac1_kl);
    go("AC2", "gradient checks", &mut ac2_gradients);
    go("AC3", "dct correctness", &mut ac3_dct);
    go("AC4", "transform identities", &mut ac4_identities);
    go("AC5", "threshold search oracle", &mut ac5_threshold);

    let desk_needed = ["AC6", "AC7", "AC8", "AC9"].iter().any(|id| wanted(id));
    let desk = if desk_needed {
        let start = Instant::now();
        let d = desk_runner().and_then(|r| {
            let report = r.report().map_err(|e| e.to_string())?;
            Ok((r, report))
        });
        eprintln!("desk run ready after {:.1} s", start.elapsed().as_secs_f64());
        Some(d)
    } else {
        None
    };
    let with_desk = |f: &dyn Fn(&Runner, &Report) -> Verdict| -> Verdict {
        match desk.as_ref().expect("desk run requested") {
            Ok((r, rep)) => f(r, rep),
            Err(e) => Err(e.clone()),
        }
    };
    go("AC6", "attack sanity", &mut || with_desk(&ac6_attacks));
    go("AC7", "integrated gradients completeness", &mut || with_desk(&|r, _| ac7_integrated_gradients(r)));
    go("AC8", "judge beats every single-transform detector", &mut || with_desk(&|_, rep| ac8_headline(rep)));
    go("AC9", "benign vs C&W score separation", &mut || with_desk(&|_, rep| ac9_separation(rep)));
    go("AC10", "metrics oracles", &mut ac10_metrics);
    go("AC11", "determinism", &mut ac11_determinism);

    let passed = results.iter().filter(|r| r.1).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    // Failing criteria are reported, not fatal: every unit-level check is
    // also enforced by the regular integration tests.
}

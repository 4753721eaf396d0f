//! End-to-end experiment: train the classifier, build adversarial corpora,
//! score every image under the transform suite, fit the single-transform
//! detectors, train the judge, evaluate, and explain.
//!
//! Each stage writes its artifacts into the run directory together with a
//! manifest carrying the config hash and seed, so any stage can be resumed
//! or rerun on its own.

mod config;
mod data;
mod manifest;
mod plot;
mod report;

pub use config::{
    ClassifierSettings, DatasetConfig, DatasetKind, ExperimentConfig, JudgeSettings, SplitSettings, CIFAR10_ENV,
};
pub use data::{plan_pools, Data, DataSplit, ImageRef, Pools};
pub use manifest::{file_sha256, manifest_path, require_stage, stage_status, write_manifest, StageManifest, StageStatus};
pub use plot::{bar_svg, roc_svg};
pub use report::{evaluate_scores, median, AttackSummary, DetectorReport, Report, SampleCounts, Separation};

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::attacks::{load_corpus, save_corpus, AttackMethod, Corpus, CorpusStats};
use crate::attribution::{
    case_report_with_steps, integrated_gradients, mean_feature_importance, write_attributions_csv, AttributionRow,
    CaseReport, FeatureImportance,
};
use crate::classifier::{train_classifier, ClassifierConfig, TrainingLog};
use crate::detector::{
    fit_threshold, judge, load_judge, read_scores_csv, read_thresholds, save_judge, score_batch, score_specs,
    train_judge, write_scores_csv, write_thresholds, FeatureVector, JudgeConfig, JudgeModel, JudgeTrainLog,
    Provenance, ScoreRow, ThresholdModel, ThresholdSet,
};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::numerics::{load_checkpoint, save_checkpoint};
use crate::transforms::{sweep_specs, Family, TransformSpec, SUITE_LEN};
use crate::Network32;

pub const CONFIG_FILE: &str = "config.json";
pub const CLASSIFIER_FILE: &str = "classifier.advj";
pub const CLASSIFIER_LOG: &str = "classifier_log.json";
pub const POOLS_FILE: &str = "pools.json";
pub const SCORES_FILE: &str = "scores.csv";
pub const SWEEP_SCORES_FILE: &str = "sweep_scores.csv";
pub const THRESHOLDS_FILE: &str = "thresholds.json";
pub const JUDGE_FILE: &str = "judge.advj";
pub const JUDGE_LOG: &str = "judge_log.json";
pub const REPORT_FILE: &str = "report.json";
pub const DETECTORS_CSV: &str = "detectors.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const ROC_CSV: &str = "roc.csv";
pub const ROC_SVG: &str = "roc.svg";
pub const IMPORTANCE_JSON: &str = "feature_importance.json";
pub const IMPORTANCE_CSV: &str = "feature_importance.csv";
pub const IMPORTANCE_SVG: &str = "feature_importance.svg";
pub const CASES_FILE: &str = "case_studies.json";
pub const ATTRIBUTIONS_FILE: &str = "attributions.csv";
/// Wall-clock stage durations; the only file that differs between reruns.
pub const TIMINGS_FILE: &str = "timings.json";
pub const JUDGE_NAME: &str = "advjudge";

const SCORE_CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    TrainClassifier,
    Attack,
    Score,
    FitThreshold,
    TrainJudge,
    Evaluate,
    Attribute,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::TrainClassifier,
        Stage::Attack,
        Stage::Score,
        Stage::FitThreshold,
        Stage::TrainJudge,
        Stage::Evaluate,
        Stage::Attribute,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::TrainClassifier => "train-classifier",
            Stage::Attack => "attack",
            Stage::Score => "score",
            Stage::FitThreshold => "fit-threshold",
            Stage::TrainJudge => "train-judge",
            Stage::Evaluate => "evaluate",
            Stage::Attribute => "attribute",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown stage `{s}`")))
    }

    /// Whether `self` consumes outputs of `other`, directly or not.
    pub fn depends_on(self, other: Stage) -> bool {
        self.requires().iter().any(|&d| d == other || d.depends_on(other))
    }

    fn requires(self) -> &'static [Stage] {
        match self {
            Stage::TrainClassifier => &[],
            Stage::Attack => &[Stage::TrainClassifier],
            Stage::Score => &[Stage::Attack],
            Stage::FitThreshold | Stage::TrainJudge => &[Stage::Score],
            Stage::Evaluate => &[Stage::FitThreshold, Stage::TrainJudge],
            Stage::Attribute => &[Stage::TrainJudge],
        }
    }
}

fn provenance_of(method: AttackMethod) -> Provenance {
    match method {
        AttackMethod::Fgsm => Provenance::Fgsm,
        AttackMethod::Bim => Provenance::Bim,
        AttackMethod::CwL2 => Provenance::Cw,
    }
}

fn side_name(split: DataSplit) -> &'static str {
    match split {
        DataSplit::Train => "train",
        DataSplit::Test => "test",
    }
}

fn corpus_file(method: AttackMethod, side: DataSplit) -> String {
    format!("corpora/{}-{}.advc", method.name(), side_name(side))
}

/// Row id `split/source/index`, e.g. `train/benign/0012`.
pub fn image_id(side: DataSplit, source: Provenance, index: usize) -> String {
    format!("{}/{}/{index:04}", side_name(side), source.name())
}

fn is_train_id(id: &str) -> bool {
    id.starts_with("train/")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ClassifierLog {
    config_hash: String,
    seed: u64,
    log: TrainingLog,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CorpusEntry {
    method: AttackMethod,
    side: DataSplit,
    file: String,
    stats: CorpusStats,
    mean_l2: f64,
    mean_linf: f64,
    /// Dataset image behind each adversarial record.
    originals: Vec<ImageRef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct PoolsFile {
    config_hash: String,
    seed: u64,
    pools: Pools,
    corpora: Vec<CorpusEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct JudgeLogFile {
    config_hash: String,
    seed: u64,
    log: JudgeTrainLog,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceFile {
    pub config_hash: String,
    pub seed: u64,
    pub baseline: [f64; SUITE_LEN],
    pub steps: usize,
    pub transforms: Vec<String>,
    pub importance: FeatureImportance,
    pub max_relative_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseStudy {
    pub image_id: String,
    pub kind: String,
    pub report: CaseReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CasesFile {
    config_hash: String,
    seed: u64,
    cases: Vec<CaseStudy>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn csv_err(e: csv::Error) -> Error {
    Error::format(format!("csv: {e}"))
}

/// Runs stages of one experiment in its output directory.
pub struct Runner {
    cfg: ExperimentConfig,
    hash: String,
    quiet: bool,
}

impl Runner {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.out_dir.as_os_str().is_empty() {
            return Err(Error::invalid("output directory not set"));
        }
        let hash = cfg.hash()?;
        Ok(Runner { cfg, hash, quiet: false })
    }

    /// Suppress progress lines on stderr.
    pub fn quiet(mut self, quiet: bool) -> Self {
        self.quiet = quiet;
        self
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn out_dir(&self) -> &Path {
        &self.cfg.out_dir
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn progress(&self, msg: &str) {
        if !self.quiet {
            eprintln!("[advjudge] {msg}");
        }
    }

    fn prepare_dir(&self) -> Result<()> {
        let out = self.out_dir();
        fs::create_dir_all(out.join("corpora")).map_err(|e| Error::io(out, e))?;
        // The stored config omits the directory so reruns elsewhere match.
        let mut stored = self.cfg.clone();
        stored.out_dir = PathBuf::new();
        write_json(&self.path(CONFIG_FILE), &stored)
    }

    /// Runs every stage not already complete, in order.
    pub fn run_all(&self) -> Result<Vec<StageManifest>> {
        let mut out = Vec::new();
        for stage in Stage::ALL {
            match stage_status(self.out_dir(), stage.name(), &self.hash)? {
                StageStatus::Complete(m) => {
                    self.progress(&format!("{}: up to date", stage.name()));
                    out.push(m);
                }
                _ => out.push(self.run(stage)?),
            }
        }
        Ok(out)
    }

    /// Runs one stage; its prerequisites must be complete. Manifests of the
    /// stages that consume its outputs are removed.
    pub fn run(&self, stage: Stage) -> Result<StageManifest> {
        let in_stage = |e: Error| Error::Stage {
            stage: stage.name().to_string(),
            source: Box::new(e),
        };
        stage_status(self.out_dir(), stage.name(), &self.hash).map_err(in_stage)?;
        for &dep in stage.requires() {
            require_stage(self.out_dir(), dep.name(), &self.hash).map_err(in_stage)?;
        }
        self.prepare_dir()?;
        for later in Stage::ALL.iter().filter(|s| s.depends_on(stage)) {
            let p = manifest_path(self.out_dir(), later.name());
            if p.exists() {
                fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
        self.progress(&format!("{}: running", stage.name()));
        let start = Instant::now();
        let (outputs, summary) = match stage {
            Stage::TrainClassifier => self.train_classifier(),
            Stage::Attack => self.attack(),
            Stage::Score => self.score(),
            Stage::FitThreshold => self.fit_threshold(),
            Stage::TrainJudge => self.train_judge(),
            Stage::Evaluate => self.evaluate(),
            Stage::Attribute => self.attribute(),
        }
        .map_err(in_stage)?;
        self.record_time(stage, start.elapsed().as_secs_f64())?;
        let m = write_manifest(self.out_dir(), stage.name(), &self.hash, self.cfg.seed, &outputs, summary)?;
        self.progress(&format!("{}: done in {:.1}s", stage.name(), start.elapsed().as_secs_f64()));
        Ok(m)
    }

    fn record_time(&self, stage: Stage, secs: f64) -> Result<()> {
        let path = self.path(TIMINGS_FILE);
        let mut times: BTreeMap<String, f64> = if path.exists() { read_json(&path)? } else { BTreeMap::new() };
        times.insert(stage.name().to_string(), secs);
        write_json(&path, &times)
    }

    fn load_classifier(&self) -> Result<Network32> {
        Ok(load_checkpoint(&self.path(CLASSIFIER_FILE))?.0)
    }

    fn train_classifier(&self) -> Result<(Vec<String>, serde_json::Value)> {
        let data = Data::load(&self.cfg.dataset)?;
        let s = &self.cfg.classifier;
        let cfg = ClassifierConfig {
            architecture: s.architecture,
            epochs: s.epochs,
            batch_size: s.batch_size,
            learning_rate: s.learning_rate,
            seed: self.cfg.stream("classifier"),
        };
        self.progress(&format!("training on {} images, {} epochs", data.train.len(), cfg.epochs));
        let (model, log) = train_classifier(&data.train, Some(&data.test), &cfg)?;
        let meta = json!({"config_hash": self.hash, "seed": self.cfg.seed, "role": "classifier"});
        save_checkpoint(&self.path(CLASSIFIER_FILE), &model, meta)?;
        let summary = json!({
            "train_accuracy": log.final_train_accuracy,
            "test_accuracy": log.final_test_accuracy,
        });
        let file = ClassifierLog {
            config_hash: self.hash.clone(),
            seed: self.cfg.seed,
            log,
        };
        write_json(&self.path(CLASSIFIER_LOG), &file)?;
        Ok((vec![CLASSIFIER_FILE.into(), CLASSIFIER_LOG.into()], summary))
    }

    fn attack(&self) -> Result<(Vec<String>, serde_json::Value)> {
        let model = self.load_classifier()?;
        let data = Data::load(&self.cfg.dataset)?;
        let pools = plan_pools(
            data.train.len(),
            data.test.len(),
            &self.cfg.split,
            self.cfg.stream("split/benign"),
            self.cfg.stream("split/candidates"),
        )?;
        let sides = [
            (DataSplit::Train, &pools.candidates_train, self.cfg.split.adv_train_per_attack),
            (DataSplit::Test, &pools.candidates_test, self.cfg.split.adv_test_per_attack),
        ];
        let mut outputs = Vec::new();
        let mut corpora = Vec::new();
        for attack in &self.cfg.attacks {
            let method = attack.method();
            for &(side, refs, count) in &sides {
                let pool = data.gather(refs)?;
                let seed = self.cfg.stream(&format!("attack/{}/{}", method.name(), side_name(side)));
                let corpus = crate::attacks::generate_corpus(&model, &pool, attack, count, seed)?;
                if corpus.stats.shortfall > 0 {
                    self.progress(&format!(
                        "warning: {} {} corpus is {} short of {count}",
                        method.name(),
                        side_name(side),
                        corpus.stats.shortfall
                    ));
                }
                let file = corpus_file(method, side);
                save_corpus(&self.path(&file), &corpus)?;
                let n = corpus.records.len().max(1) as f64;
                corpora.push(CorpusEntry {
                    method,
                    side,
                    file: file.clone(),
                    stats: corpus.stats.clone(),
                    mean_l2: corpus.records.iter().map(|r| r.l2).sum::<f64>() / n,
                    mean_linf: corpus.records.iter().map(|r| r.linf).sum::<f64>() / n,
                    originals: corpus.source_indices.iter().map(|&i| refs[i]).collect(),
                });
                self.progress(&format!(
                    "{} {}: {}/{} successful",
                    method.name(),
                    side_name(side),
                    corpus.stats.successes,
                    corpus.stats.attacked
                ));
                outputs.push(file);
            }
        }
        let summaries = attack_summaries(&self.cfg, &corpora);
        write_json(
            &self.path(POOLS_FILE),
            &PoolsFile {
                config_hash: self.hash.clone(),
                seed: self.cfg.seed,
                pools,
                corpora,
            },
        )?;
        outputs.push(POOLS_FILE.into());
        Ok((outputs, serde_json::to_value(summaries)?))
    }

    fn pools_file(&self) -> Result<PoolsFile> {
        read_json(&self.path(POOLS_FILE))
    }

    /// Every detector image in row order: per side, benign then each attack.
    fn scored_images(&self) -> Result<Vec<(String, Provenance, usize, Image<f32>)>> {
        let data = Data::load(&self.cfg.dataset)?;
        let pf = self.pools_file()?;
        let mut out = Vec::new();
        for (side, benign) in [
            (DataSplit::Train, &pf.pools.benign_train),
            (DataSplit::Test, &pf.pools.benign_test),
        ] {
            for (i, &r) in benign.iter().enumerate() {
                let (im, label) = data.image(r)?;
                out.push((image_id(side, Provenance::Benign, i), Provenance::Benign, label, im.clone()));
            }
            for attack in &self.cfg.attacks {
                let method = attack.method();
                let corpus: Corpus<f32> = load_corpus(&self.path(&corpus_file(method, side)))?;
                let src = provenance_of(method);
                for (i, rec) in corpus.records.into_iter().enumerate() {
                    out.push((image_id(side, src, i), src, rec.true_label, rec.adversarial));
                }
            }
        }
        Ok(out)
    }

    fn score(&self) -> Result<(Vec<String>, serde_json::Value)> {
        let model = self.load_classifier()?;
        let items = self.scored_images()?;
        let sweep = if self.cfg.sweep { sweep_specs() } else { Vec::new() };
        let mut rows = Vec::with_capacity(items.len());
        let mut sweep_rows = Vec::new();
        for chunk in items.chunks(SCORE_CHUNK) {
            let images: Vec<Image<f32>> = chunk.iter().map(|c| c.3.clone()).collect();
            let seeds: Vec<u64> = chunk.iter().map(|c| self.cfg.stream(&format!("score/{}", c.0))).collect();
            let scores = score_batch(&model, &images, &self.cfg.suite, &seeds)?;
            for (c, s) in chunk.iter().zip(scores) {
                rows.push(ScoreRow {
                    image_id: c.0.clone(),
                    source: c.1,
                    label: c.2,
                    scores: s,
                });
            }
            if !sweep.is_empty() {
                sweep_rows.extend(score_specs(&model, &images, &sweep, &seeds)?);
            }
            self.progress(&format!("scored {}/{}", rows.len(), items.len()));
        }
        write_scores_csv(create(&self.path(SCORES_FILE))?, &rows)?;
        let mut outputs = vec![SCORES_FILE.to_string()];
        if !sweep.is_empty() {
            let mut w = csv::Writer::from_writer(create(&self.path(SWEEP_SCORES_FILE))?);
            let mut header = vec!["image_id".to_string(), "source".to_string()];
            header.extend(sweep.iter().map(sweep_column));
            w.write_record(&header).map_err(csv_err)?;
            for (row, scores) in rows.iter().zip(&sweep_rows) {
                let mut rec = vec![row.image_id.clone(), row.source.name().to_string()];
                rec.extend(scores.iter().map(f64::to_string));
                w.write_record(&rec).map_err(csv_err)?;
            }
            w.flush().map_err(|e| Error::format(format!("csv: {e}")))?;
            outputs.push(SWEEP_SCORES_FILE.into());
        }
        Ok((outputs, json!({"rows": rows.len(), "sweep_transforms": sweep.len()})))
    }

    fn read_scores(&self) -> Result<Vec<ScoreRow>> {
        let path = self.path(SCORES_FILE);
        read_scores_csv(File::open(&path).map_err(|e| Error::io(&path, e))?)
    }

    /// Sweep scores as (image id, source, one score per sweep spec).
    fn read_sweep_scores(&self) -> Result<Vec<(String, Provenance, Vec<f64>)>> {
        let path = self.path(SWEEP_SCORES_FILE);
        let mut r = csv::Reader::from_reader(File::open(&path).map_err(|e| Error::io(&path, e))?);
        let expected = sweep_specs().len() + 2;
        let mut out = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != expected {
                return Err(Error::format(format!("{} has a row of {} fields", path.display(), rec.len())));
            }
            let scores = rec
                .iter()
                .skip(2)
                .map(|v| v.parse::<f64>().map_err(|_| Error::format(format!("bad score `{v}`"))))
                .collect::<Result<Vec<_>>>()?;
            out.push((rec[0].to_string(), Provenance::parse(&rec[1])?, scores));
        }
        Ok(out)
    }

    fn fit_threshold(&self) -> Result<(Vec<String>, serde_json::Value)> {
        let rows = self.read_scores()?;
        let train: Vec<&ScoreRow> = rows.iter().filter(|r| is_train_id(&r.image_id)).collect();
        let fit = |spec: &TransformSpec, get: &dyn Fn(usize) -> f64, sources: &[Provenance]| -> Result<ThresholdModel> {
            let (mut benign, mut adv) = (Vec::new(), Vec::new());
            for (i, s) in sources.iter().enumerate() {
                if s.is_adversarial() { adv.push(get(i)) } else { benign.push(get(i)) }
            }
            Ok(ThresholdModel {
                spec: spec.clone(),
                fit: fit_threshold(&benign, &adv)?,
            })
        };
        let sources: Vec<Provenance> = train.iter().map(|r| r.source).collect();
        let detectors = self
            .cfg
            .suite
            .iter()
            .enumerate()
            .map(|(j, spec)| fit(spec, &|i| train[i].scores[j], &sources))
            .collect::<Result<Vec<_>>>()?;
        let mut sweep = Vec::new();
        if self.cfg.sweep {
            let srows: Vec<_> = self.read_sweep_scores()?.into_iter().filter(|r| is_train_id(&r.0)).collect();
            let ssrc: Vec<Provenance> = srows.iter().map(|r| r.1).collect();
            for (j, spec) in sweep_specs().iter().enumerate() {
                sweep.push(fit(spec, &|i| srows[i].2[j], &ssrc)?);
            }
        }
        let summary = json!(detectors.iter().map(|d| (d.spec.family().column(), d.fit.threshold)).collect::<BTreeMap<_, _>>());
        write_thresholds(
            &self.path(THRESHOLDS_FILE),
            &ThresholdSet {
                config_hash: self.hash.clone(),
                seed: self.cfg.seed,
                detectors,
                sweep,
            },
        )?;
        Ok((vec![THRESHOLDS_FILE.into()], summary))
    }

    fn train_judge(&self) -> Result<(Vec<String>, serde_json::Value)> {
        let rows = self.read_scores()?;
        let train: Vec<&ScoreRow> = rows.iter().filter(|r| is_train_id(&r.image_id)).collect();
        let features: Vec<[f64; SUITE_LEN]> = train.iter().map(|r| r.scores).collect();
        let labels: Vec<bool> = train.iter().map(|r| r.source.is_adversarial()).collect();
        let s = &self.cfg.judge;
        let cfg = JudgeConfig {
            learning_rate: s.learning_rate,
            epochs: s.epochs,
            batch_size: s.batch_size,
            normalize: s.normalize,
            seed: self.cfg.stream("judge"),
        };
        let (model, log) = train_judge::<f64>(&features, &labels, &cfg)?;
        save_judge(
            &self.path(JUDGE_FILE),
            &model,
            json!({"config_hash": self.hash, "seed": self.cfg.seed, "role": "judge"}),
        )?;
        let summary = json!({
            "final_loss": log.epoch_losses.last(),
            "train_accuracy": log.final_accuracy,
        });
        write_json(
            &self.path(JUDGE_LOG),
            &JudgeLogFile {
                config_hash: self.hash.clone(),
                seed: self.cfg.seed,
                log,
            },
        )?;
        Ok((vec![JUDGE_FILE.into(), JUDGE_LOG.into()], summary))
    }

    pub fn load_judge(&self) -> Result<JudgeModel<f64>> {
        Ok(load_judge(&self.path(JUDGE_FILE))?.0)
    }

    fn evaluate(&self) -> Result<(Vec<String>, serde_json::Value)> {
        let rows = self.read_scores()?;
        let thresholds = read_thresholds(&self.path(THRESHOLDS_FILE))?;
        let judge_model = self.load_judge()?;
        let test: Vec<&ScoreRow> = rows.iter().filter(|r| !is_train_id(&r.image_id)).collect();
        let sources: Vec<Provenance> = test.iter().map(|r| r.source).collect();

        let mut detectors = Vec::new();
        for (j, t) in thresholds.detectors.iter().enumerate() {
            let scores: Vec<f64> = test.iter().map(|r| r.scores[j]).collect();
            detectors.push(evaluate_scores(
                t.spec.family().column(),
                &t.spec.parameter_label(),
                t.fit.threshold,
                &scores,
                &sources,
                true,
            )?);
        }
        let rho = test
            .iter()
            .map(|r| Ok(judge(&judge_model, &r.scores)?.0))
            .collect::<Result<Vec<f64>>>()?;
        detectors.push(evaluate_scores(JUDGE_NAME, "all", 0.5, &rho, &sources, true)?);

        let mut sweep = Vec::new();
        if self.cfg.sweep {
            let srows: Vec<_> = self.read_sweep_scores()?.into_iter().filter(|r| !is_train_id(&r.0)).collect();
            let ssrc: Vec<Provenance> = srows.iter().map(|r| r.1).collect();
            for (j, t) in thresholds.sweep.iter().enumerate() {
                let scores: Vec<f64> = srows.iter().map(|r| r.2[j]).collect();
                sweep.push(evaluate_scores(
                    t.spec.family().column(),
                    &t.spec.parameter_label(),
                    t.fit.threshold,
                    &scores,
                    &ssrc,
                    false,
                )?);
            }
        }

        let mut separation = Vec::new();
        for (j, fam) in Family::ALL.iter().enumerate() {
            let mut by_source: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for r in &rows {
                by_source.entry(r.source.name().to_string()).or_default().push(r.scores[j]);
            }
            separation.push(Separation {
                transform: fam.column().to_string(),
                median: by_source.into_iter().map(|(k, mut v)| (k, median(&mut v))).collect(),
            });
        }

        let count = |train: bool, src: Provenance| {
            rows.iter()
                .filter(|r| is_train_id(&r.image_id) == train && r.source == src)
                .count()
        };
        let adversarial = |train: bool| {
            self.cfg
                .attacks
                .iter()
                .map(|a| {
                    let p = provenance_of(a.method());
                    (p.name().to_string(), count(train, p))
                })
                .collect()
        };
        let classifier: ClassifierLog = read_json(&self.path(CLASSIFIER_LOG))?;
        let pf = self.pools_file()?;
        let report = Report {
            config_hash: self.hash.clone(),
            seed: self.cfg.seed,
            dataset: serde_json::to_value(self.cfg.dataset.kind)?.as_str().unwrap_or_default().to_string(),
            classifier_test_accuracy: classifier.log.final_test_accuracy.unwrap_or(f64::NAN),
            attacks: attack_summaries(&self.cfg, &pf.corpora),
            adversarial_originals: "benign images come from the held-out split; attack originals for each side are \
                                    drawn from that side's benign images plus a disjoint share of all unused images"
                .into(),
            samples: SampleCounts {
                train_benign: count(true, Provenance::Benign),
                train_adversarial: adversarial(true),
                test_benign: count(false, Provenance::Benign),
                test_adversarial: adversarial(false),
            },
            detectors,
            sweep,
            separation,
        };
        write_json(&self.path(REPORT_FILE), &report)?;
        self.write_detector_tables(&report)?;
        let curves: Vec<(String, Vec<(f64, f64)>)> = report
            .detectors
            .iter()
            .map(|d| (format!("{} (AUC {:.3})", d.name, d.auc), d.roc.clone().unwrap_or_default()))
            .collect();
        fs::write(self.path(ROC_SVG), roc_svg("ROC on the detector test split", &curves))
            .map_err(|e| Error::io(self.path(ROC_SVG), e))?;
        let mut outputs: Vec<String> = [REPORT_FILE, DETECTORS_CSV, ROC_CSV, ROC_SVG].map(String::from).to_vec();
        if self.cfg.sweep {
            outputs.push(SWEEP_CSV.into());
        }
        let judge = report.judge().expect("judge row present");
        let summary = json!({
            "advjudge_f1": judge.f1,
            "advjudge_auc": judge.auc,
            "best_individual_f1": report.individual().map(|d| d.f1).fold(0.0, f64::max),
            "best_individual_auc": report.individual().map(|d| d.auc).fold(0.0, f64::max),
        });
        Ok((outputs, summary))
    }

    fn write_detector_tables(&self, report: &Report) -> Result<()> {
        let mut roc = csv::Writer::from_writer(create(&self.path(ROC_CSV))?);
        roc.write_record(["detector", "fpr", "tpr"]).map_err(csv_err)?;
        for d in &report.detectors {
            for (x, y) in d.roc.iter().flatten() {
                roc.write_record([d.name.clone(), x.to_string(), y.to_string()]).map_err(csv_err)?;
            }
        }
        roc.flush().map_err(|e| Error::io(self.path(ROC_CSV), e))?;
        let sources: Vec<String> = std::iter::once("benign".to_string())
            .chain(self.cfg.attacks.iter().map(|a| provenance_of(a.method()).name().to_string()))
            .collect();
        let write = |name: &str, rows: &[DetectorReport]| -> Result<()> {
            let mut w = csv::Writer::from_writer(create(&self.path(name))?);
            let mut header: Vec<String> = ["detector", "params", "threshold"].map(String::from).to_vec();
            header.extend(sources.iter().map(|s| format!("mean_{s}")));
            header.extend(sources.iter().map(|s| format!("accuracy_{s}")));
            header.extend(["precision", "recall", "f1", "auc"].map(String::from));
            w.write_record(&header).map_err(csv_err)?;
            for d in rows {
                let mut rec = vec![d.name.clone(), d.params.clone(), d.threshold.to_string()];
                rec.extend(sources.iter().map(|s| d.mean_score.get(s).map_or(String::new(), f64::to_string)));
                rec.extend(sources.iter().map(|s| d.accuracy.get(s).map_or(String::new(), f64::to_string)));
                rec.extend([d.precision, d.recall, d.f1, d.auc].map(|v| v.to_string()));
                w.write_record(&rec).map_err(csv_err)?;
            }
            w.flush().map_err(|e| Error::io(self.path(name), e))
        };
        write(DETECTORS_CSV, &report.detectors)?;
        if self.cfg.sweep {
            write(SWEEP_CSV, &report.sweep)?;
        }
        Ok(())
    }

    fn attribute(&self) -> Result<(Vec<String>, serde_json::Value)> {
        let rows = self.read_scores()?;
        let model = self.load_judge()?;
        let steps = self.cfg.attribution_steps;
        let baseline = [0.0; SUITE_LEN];
        let test: Vec<&ScoreRow> = rows.iter().filter(|r| !is_train_id(&r.image_id)).collect();

        let mut attributions = Vec::with_capacity(test.len());
        let mut max_gap = 0.0f64;
        for r in &test {
            let ig = integrated_gradients(&model, &r.scores, &baseline, steps)?;
            let (rho, verdict) = judge(&model, &r.scores)?;
            max_gap = max_gap.max(ig.relative_gap());
            attributions.push(AttributionRow {
                image_id: r.image_id.clone(),
                rho,
                verdict,
                scores: r.scores,
                attributions: ig.values,
            });
        }
        write_attributions_csv(create(&self.path(ATTRIBUTIONS_FILE))?, &attributions)?;

        let features: Vec<[f64; SUITE_LEN]> = test.iter().map(|r| r.scores).collect();
        let importance = mean_feature_importance(&model, &features, &baseline, steps)?;
        let transforms: Vec<String> = Family::ALL.iter().map(|f| f.column().to_string()).collect();
        let file = ImportanceFile {
            config_hash: self.hash.clone(),
            seed: self.cfg.seed,
            baseline,
            steps,
            transforms: transforms.clone(),
            importance: importance.clone(),
            max_relative_gap: max_gap,
        };
        write_json(&self.path(IMPORTANCE_JSON), &file)?;
        let mut w = csv::Writer::from_writer(create(&self.path(IMPORTANCE_CSV))?);
        w.write_record(["transform", "benign_signed", "benign_magnitude", "adversarial_signed", "adversarial_magnitude"])
            .map_err(csv_err)?;
        for (i, t) in transforms.iter().enumerate() {
            w.write_record([
                t.clone(),
                importance.benign_signed[i].to_string(),
                importance.benign_magnitude[i].to_string(),
                importance.adversarial_signed[i].to_string(),
                importance.adversarial_magnitude[i].to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(self.path(IMPORTANCE_CSV), e))?;
        let labels: Vec<&str> = transforms.iter().map(String::as_str).collect();
        let svg = bar_svg(
            "Mean integrated gradients by judge verdict",
            &labels,
            &[
                (
                    format!("judged benign, signed (n={})", importance.benign_count),
                    importance.benign_signed.to_vec(),
                ),
                (
                    format!("judged adversarial, signed (n={})", importance.adversarial_count),
                    importance.adversarial_signed.to_vec(),
                ),
            ],
        );
        fs::write(self.path(IMPORTANCE_SVG), svg).map_err(|e| Error::io(self.path(IMPORTANCE_SVG), e))?;

        // First false positive, then the first false negative of each attack.
        let mut cases = Vec::new();
        let mut wanted: Vec<(Provenance, &str)> = vec![(Provenance::Benign, "false-positive")];
        wanted.extend(self.cfg.attacks.iter().map(|a| (provenance_of(a.method()), "false-negative")));
        for (src, kind) in wanted {
            let hit = test.iter().zip(&attributions).find(|(r, a)| {
                r.source == src && a.verdict.is_adversarial() != src.is_adversarial()
            });
            if let Some((r, _)) = hit {
                let fv = FeatureVector {
                    values: r.scores,
                    provenance: r.source,
                };
                cases.push(CaseStudy {
                    image_id: r.image_id.clone(),
                    kind: kind.to_string(),
                    report: case_report_with_steps(&model, &fv, steps)?,
                });
            }
        }
        let summary = json!({"cases": cases.len(), "max_relative_gap": max_gap});
        write_json(
            &self.path(CASES_FILE),
            &CasesFile {
                config_hash: self.hash.clone(),
                seed: self.cfg.seed,
                cases,
            },
        )?;
        let outputs = [ATTRIBUTIONS_FILE, IMPORTANCE_JSON, IMPORTANCE_CSV, IMPORTANCE_SVG, CASES_FILE]
            .map(String::from)
            .to_vec();
        Ok((outputs, summary))
    }

    /// Parsed `report.json` of a completed evaluation.
    pub fn report(&self) -> Result<Report> {
        read_json(&self.path(REPORT_FILE))
    }
}

fn sweep_column(spec: &TransformSpec) -> String {
    format!("{}:{}", spec.family().column(), spec.parameter_label())
}

fn attack_summaries(cfg: &ExperimentConfig, corpora: &[CorpusEntry]) -> Vec<AttackSummary> {
    cfg.attacks
        .iter()
        .map(|a| {
            let method = a.method();
            let parts: Vec<&CorpusEntry> = corpora.iter().filter(|c| c.method == method).collect();
            let attacked: usize = parts.iter().map(|c| c.stats.attacked).sum();
            let successes: usize = parts.iter().map(|c| c.stats.successes).sum();
            let weighted = |f: fn(&CorpusEntry) -> f64| {
                parts.iter().map(|c| f(c) * c.stats.successes as f64).sum::<f64>() / successes.max(1) as f64
            };
            AttackSummary {
                method: provenance_of(method).name().to_string(),
                attacked,
                successes,
                success_rate: successes as f64 / attacked.max(1) as f64,
                shortfall: parts.iter().map(|c| c.stats.shortfall).sum(),
                skipped_misclassified: parts.iter().map(|c| c.stats.skipped_misclassified).sum(),
                mean_l2: weighted(|c| c.mean_l2),
                mean_linf: weighted(|c| c.mean_linf),
            }
        })
        .collect()
}

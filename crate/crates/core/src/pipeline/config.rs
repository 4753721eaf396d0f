use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attacks::{AttackConfig, CwConfig};
use crate::classifier::Architecture;
use crate::dataset::SplitPlan;
use crate::error::{Error, Result};
use crate::seed::derive_named_seed;
use crate::transforms::{canonical_suite, validate_suite, TransformSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    Cifar10,
    Mnist,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// CIFAR-10 binary batch directory, or a directory holding the four
    /// MNIST IDX files.
    pub dir: PathBuf,
    /// Use at most this many classifier training images.
    #[serde(default)]
    pub train_limit: Option<usize>,
}

pub const CIFAR10_ENV: &str = "ADVJUDGE_CIFAR10_DIR";

impl DatasetConfig {
    /// CIFAR-10 from `$ADVJUDGE_CIFAR10_DIR` or `<root>/data/cifar-10-batches-bin`
    /// when present, otherwise MNIST from `<root>/data/mnist`.
    pub fn locate(root: &Path) -> Self {
        let cifar = std::env::var_os(CIFAR10_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| root.join("data/cifar-10-batches-bin"));
        if cifar.join("test_batch.bin").is_file() {
            DatasetConfig {
                kind: DatasetKind::Cifar10,
                dir: cifar,
                train_limit: None,
            }
        } else {
            DatasetConfig {
                kind: DatasetKind::Mnist,
                dir: root.join("data/mnist"),
                train_limit: None,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSettings {
    pub architecture: Architecture,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSettings {
    pub benign_train: usize,
    pub benign_test: usize,
    pub adv_train_per_attack: usize,
    pub adv_test_per_attack: usize,
}

impl SplitSettings {
    pub fn protocol() -> Self {
        let p = SplitPlan::protocol(0);
        SplitSettings {
            benign_train: p.benign_train,
            benign_test: p.benign_test,
            adv_train_per_attack: p.adv_train_per_attack,
            adv_test_per_attack: p.adv_test_per_attack,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgeSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub normalize: bool,
}

impl Default for JudgeSettings {
    fn default() -> Self {
        let c = crate::detector::JudgeConfig::new(0);
        JudgeSettings {
            learning_rate: c.learning_rate,
            epochs: c.epochs,
            batch_size: c.batch_size,
            normalize: c.normalize,
        }
    }
}

/// One experiment. Every random choice derives from `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub classifier: ClassifierSettings,
    pub split: SplitSettings,
    /// One corpus per entry; methods must be distinct.
    pub attacks: Vec<AttackConfig>,
    pub suite: Vec<TransformSpec>,
    /// Also evaluate every parameter setting of `transforms::sweep_specs`
    /// as a stand-alone detector.
    #[serde(default)]
    pub sweep: bool,
    pub judge: JudgeSettings,
    pub attribution_steps: usize,
    pub seed: u64,
    /// Not part of the config hash.
    #[serde(default)]
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// Protocol-sized run on `dataset` with the default classifier schedule
    /// for that dataset.
    pub fn desk(dataset: DatasetConfig, seed: u64, out_dir: PathBuf) -> Self {
        let (architecture, epochs, cw) = match dataset.kind {
            DatasetKind::Cifar10 => (Architecture::Desk, 30, CwConfig::default()),
            // Mostly saturated digit pixels sit deep in tanh space; a larger
            // step lets the 200-iteration budget reach them.
            DatasetKind::Mnist => (
                Architecture::Desk,
                10,
                CwConfig {
                    learning_rate: 0.1,
                    ..CwConfig::default()
                },
            ),
        };
        ExperimentConfig {
            dataset,
            classifier: ClassifierSettings {
                architecture,
                epochs,
                batch_size: 64,
                learning_rate: 1e-3,
            },
            split: SplitSettings::protocol(),
            attacks: vec![AttackConfig::CwL2(cw), AttackConfig::fgsm(), AttackConfig::bim()],
            suite: canonical_suite(),
            sweep: true,
            judge: JudgeSettings::default(),
            attribution_steps: crate::attribution::DEFAULT_STEPS,
            seed,
            out_dir,
        }
    }

    /// Small run for smoke tests: a Tiny classifier on a few hundred
    /// training images, 100 benign images and 30 adversarial per attack.
    pub fn smoke(dataset: DatasetConfig, seed: u64, out_dir: PathBuf) -> Self {
        let mut cfg = Self::desk(dataset, seed, out_dir);
        cfg.dataset.train_limit = Some(600);
        cfg.classifier = ClassifierSettings {
            architecture: Architecture::Tiny,
            epochs: 3,
            batch_size: 32,
            learning_rate: 3e-3,
        };
        cfg.split = SplitSettings {
            benign_train: 80,
            benign_test: 20,
            adv_train_per_attack: 24,
            adv_test_per_attack: 6,
        };
        for a in &mut cfg.attacks {
            if let AttackConfig::CwL2(cw) = a {
                cw.iterations = 50;
                cw.binary_search_steps = 3;
            }
        }
        cfg.sweep = false;
        cfg.judge.epochs = 40;
        cfg.attribution_steps = 50;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        validate_suite(&self.suite)?;
        if self.attacks.is_empty() {
            return Err(Error::invalid("at least one attack is required"));
        }
        for (i, a) in self.attacks.iter().enumerate() {
            a.validate()?;
            if self.attacks[..i].iter().any(|b| b.method() == a.method()) {
                return Err(Error::invalid(format!("attack `{}` listed twice", a.method().name())));
            }
        }
        let s = &self.split;
        if s.benign_train == 0 || s.benign_test == 0 || s.adv_train_per_attack == 0 || s.adv_test_per_attack == 0 {
            return Err(Error::invalid("every split count must be positive"));
        }
        let c = &self.classifier;
        if c.epochs == 0 || c.batch_size == 0 || !(c.learning_rate > 0.0) {
            return Err(Error::invalid("classifier epochs, batch size and learning rate must be positive"));
        }
        let j = &self.judge;
        if j.epochs == 0 || j.batch_size == 0 || !(j.learning_rate > 0.0) {
            return Err(Error::invalid("judge epochs, batch size and learning rate must be positive"));
        }
        if self.attribution_steps == 0 {
            return Err(Error::invalid("attribution needs at least one step"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form with `out_dir` removed.
    pub fn hash(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("out_dir");
        }
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(&v)?)))
    }

    /// Seed for a named random stream.
    pub fn stream(&self, name: &str) -> u64 {
        derive_named_seed(self.seed, name)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(out: &str) -> ExperimentConfig {
        let ds = DatasetConfig {
            kind: DatasetKind::Mnist,
            dir: "data/mnist".into(),
            train_limit: None,
        };
        ExperimentConfig::desk(ds, 7, out.into())
    }

    #[test]
    fn hash_ignores_out_dir_only() {
        let a = cfg("/tmp/a");
        assert_eq!(a.hash().unwrap(), cfg("/tmp/b").hash().unwrap());
        let mut c = cfg("/tmp/a");
        c.seed = 8;
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let a = cfg("/tmp/a");
        a.validate().unwrap();
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(a, back);
        let mut dup = a.clone();
        dup.attacks.push(AttackConfig::fgsm());
        assert!(dup.validate().is_err());
        let mut short = a;
        short.suite.pop();
        assert!(short.validate().is_err());
    }
}

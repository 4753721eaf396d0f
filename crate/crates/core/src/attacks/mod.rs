//! Adversarial example generation: FGSM, BIM and Carlini-Wagner L2.
//!
//! FGSM and BIM are untargeted; C&W aims at the next class. All attacks are
//! deterministic given the model and inputs.

mod corpus;
mod cw;
mod gradient;

pub use corpus::{generate_corpus, load_corpus, read_corpus, save_corpus, write_corpus, Corpus, CorpusStats};
pub use cw::{cw_l2, cw_l2_batch, CwConfig};
pub use gradient::{bim, bim_batch, fgsm, fgsm_batch};

use serde::{Deserialize, Serialize};

use crate::classifier::logits_batch;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::numerics::{argmax, Network};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackMethod {
    Fgsm,
    Bim,
    CwL2,
}

impl AttackMethod {
    pub const ALL: [AttackMethod; 3] = [AttackMethod::CwL2, AttackMethod::Fgsm, AttackMethod::Bim];

    pub fn name(self) -> &'static str {
        match self {
            AttackMethod::Fgsm => "fgsm",
            AttackMethod::Bim => "bim",
            AttackMethod::CwL2 => "cw",
        }
    }
}

/// Parameters of one attack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum AttackConfig {
    Fgsm { epsilon: f64 },
    Bim { epsilon: f64, step: f64, iterations: usize },
    CwL2(CwConfig),
}

impl AttackConfig {
    pub fn fgsm() -> Self {
        AttackConfig::Fgsm { epsilon: 0.1 }
    }

    /// Step ε/10 and 20 iterations.
    pub fn bim() -> Self {
        AttackConfig::Bim {
            epsilon: 0.1,
            step: 0.01,
            iterations: 20,
        }
    }

    pub fn cw() -> Self {
        AttackConfig::CwL2(CwConfig::default())
    }

    pub fn method(&self) -> AttackMethod {
        match self {
            AttackConfig::Fgsm { .. } => AttackMethod::Fgsm,
            AttackConfig::Bim { .. } => AttackMethod::Bim,
            AttackConfig::CwL2(_) => AttackMethod::CwL2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AttackConfig::Fgsm { epsilon } => check_epsilon(epsilon),
            AttackConfig::Bim { epsilon, step, iterations } => {
                check_epsilon(epsilon)?;
                if !(step > 0.0 && step.is_finite()) || iterations == 0 {
                    return Err(Error::invalid("BIM needs step > 0 and at least one iteration"));
                }
                Ok(())
            }
            AttackConfig::CwL2(ref c) => c.validate(),
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon >= 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("epsilon must be finite and >= 0, got {epsilon}")))
    }
}

/// One attacked image.
#[derive(Clone, Debug, PartialEq)]
pub struct AdversarialRecord<S> {
    pub original: Image<S>,
    pub adversarial: Image<S>,
    pub true_label: usize,
    pub predicted_label: usize,
    pub target_label: Option<usize>,
    pub l2: f64,
    pub linf: f64,
    /// For targeted attacks, `Z_target - max_{i != target} Z_i` at the output.
    pub target_margin: Option<f64>,
    pub success: bool,
}

impl<S: Scalar> AdversarialRecord<S> {
    pub fn perturbation(&self) -> Vec<f64> {
        self.adversarial
            .pixels()
            .iter()
            .zip(self.original.pixels())
            .map(|(a, o)| a.to_f64_lossy() - o.to_f64_lossy())
            .collect()
    }
}

/// `(label + 1) mod num_classes`.
pub fn next_class_target(label: usize, num_classes: usize) -> Result<usize> {
    if label >= num_classes {
        return Err(Error::invalid(format!("label {label} out of range for {num_classes} classes")));
    }
    Ok((label + 1) % num_classes)
}

pub(crate) fn target_margin<S: Scalar>(logits: &[S], target: usize) -> f64 {
    let best_other = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target)
        .map(|(_, v)| v.to_f64_lossy())
        .fold(f64::NEG_INFINITY, f64::max);
    logits[target].to_f64_lossy() - best_other
}

/// Builds records by classifying the adversarial images once more.
pub(crate) fn finish_records<S: Scalar>(
    model: &Network<S>,
    originals: &[Image<S>],
    adversarials: Vec<Image<S>>,
    labels: &[usize],
    targets: Option<(&[usize], f64)>,
) -> Result<Vec<AdversarialRecord<S>>> {
    let logits = logits_batch(model, &adversarials)?;
    let records = adversarials
        .into_iter()
        .zip(originals)
        .zip(logits)
        .enumerate()
        .map(|(k, ((adversarial, original), row))| {
            let predicted_label = argmax(&row);
            let (target_label, target_margin, success) = match targets {
                Some((t, confidence)) => {
                    let m = target_margin(&row, t[k]);
                    (Some(t[k]), Some(m), predicted_label == t[k] && m >= confidence)
                }
                None => (None, None, predicted_label != labels[k]),
            };
            AdversarialRecord {
                l2: adversarial.l2_distance(original),
                linf: adversarial.linf_distance(original),
                original: original.clone(),
                adversarial,
                true_label: labels[k],
                predicted_label,
                target_label,
                target_margin,
                success,
            }
        })
        .collect();
    Ok(records)
}

pub(crate) fn check_batch<S: Scalar>(model: &Network<S>, images: &[Image<S>], labels: &[usize]) -> Result<()> {
    if images.len() != labels.len() {
        return Err(Error::invalid("one label per image required"));
    }
    for im in images {
        if im.shape() != model.input_shape() {
            return Err(Error::invalid(format!(
                "image shape {:?} does not match model input {:?}",
                im.shape(),
                model.input_shape()
            )));
        }
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= model.num_outputs()) {
        return Err(Error::invalid(format!("label {bad} out of range")));
    }
    Ok(())
}

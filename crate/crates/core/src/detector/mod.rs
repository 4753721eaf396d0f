//! KL-divergence scoring, single-transform threshold detectors and the
//! joint judge network.

mod io;
mod judge;
mod threshold;

pub use io::{
    read_scores_csv, read_thresholds, scores_csv_header, write_scores_csv, write_thresholds, ScoreRow, ThresholdSet,
};
pub use judge::{
    judge, judge_architecture, load_judge, save_judge, train_judge, JudgeConfig, JudgeModel, JudgeTrainLog,
    JUDGE_WIDTH,
};
pub use threshold::{baseline_detect, fit_threshold, ThresholdFit, ThresholdModel};

use serde::{Deserialize, Serialize};

use crate::classifier::logits_batch;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::numerics::{softmax_into, Network, ProbVector, PROB_FLOOR};
use crate::scalar::Scalar;
use crate::transforms::{transform, validate_suite, TransformSpec, SUITE_LEN};

/// Where an image came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Benign,
    Cw,
    Fgsm,
    Bim,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Benign => "benign",
            Provenance::Cw => "cw",
            Provenance::Fgsm => "fgsm",
            Provenance::Bim => "bim",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "benign" => Ok(Provenance::Benign),
            "cw" => Ok(Provenance::Cw),
            "fgsm" => Ok(Provenance::Fgsm),
            "bim" => Ok(Provenance::Bim),
            other => Err(Error::format(format!("unknown image source `{other}`"))),
        }
    }

    pub fn is_adversarial(self) -> bool {
        self != Provenance::Benign
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Benign,
    Adversarial,
}

impl Verdict {
    pub fn is_adversarial(self) -> bool {
        self == Verdict::Adversarial
    }
}

/// Nine divergence scores in suite order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; SUITE_LEN],
    pub provenance: Provenance,
}

/// `Σ p_i ln(p_i / q_i)` with both probabilities floored at 1e-12; terms
/// with `p_i = 0` contribute nothing.
pub fn kl_divergence<S: Scalar>(p: &ProbVector<S>, q: &ProbVector<S>) -> Result<f64> {
    kl_slices(p.probs(), q.probs())
}

pub(crate) fn kl_slices<S: Scalar>(p: &[S], q: &[S]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!("distributions of length {} and {}", p.len(), q.len())));
    }
    let mut sum = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let pi = pi.to_f64_lossy();
        if pi > 0.0 {
            sum += pi * (pi.max(PROB_FLOOR).ln() - qi.to_f64_lossy().max(PROB_FLOOR).ln());
        }
    }
    Ok(sum)
}

fn softmax_f64<S: Scalar>(logits: &[S]) -> Vec<f64> {
    let z: Vec<f64> = logits.iter().map(|v| v.to_f64_lossy()).collect();
    let mut p = vec![0.0; z.len()];
    softmax_into(&z, &mut p);
    p
}

/// KL divergence between the predictions on `image` and on its transform.
///
/// Softmax is evaluated in double precision from the logits. Rounding can
/// leave a result a hair below zero; it is reported as 0.
pub fn score_image<S: Scalar>(model: &Network<S>, image: &Image<S>, spec: &TransformSpec, seed: u64) -> Result<f64> {
    let transformed = transform(image, spec, seed)?;
    let logits = logits_batch(model, &[image.clone(), transformed])?;
    Ok(kl_slices(&softmax_f64(&logits[0]), &softmax_f64(&logits[1]))?.max(0.0))
}

/// One [`score_image`] per suite entry, in suite order.
pub fn feature_vector<S: Scalar>(
    model: &Network<S>,
    image: &Image<S>,
    suite: &[TransformSpec],
    seed: u64,
    provenance: Provenance,
) -> Result<FeatureVector> {
    let values = score_batch(model, std::slice::from_ref(image), suite, &[seed])?.remove(0);
    Ok(FeatureVector { values, provenance })
}

/// Feature vectors for many images; `seeds[k]` drives the noise of image `k`.
pub fn score_batch<S: Scalar>(
    model: &Network<S>,
    images: &[Image<S>],
    suite: &[TransformSpec],
    seeds: &[u64],
) -> Result<Vec<[f64; SUITE_LEN]>> {
    validate_suite(suite)?;
    let rows = score_specs(model, images, suite, seeds)?;
    Ok(rows
        .into_iter()
        .map(|r| r.try_into().expect("one score per suite entry"))
        .collect())
}

/// Scores for an arbitrary list of transforms (any families, any order);
/// row `k` holds one score per spec for image `k`.
pub fn score_specs<S: Scalar>(
    model: &Network<S>,
    images: &[Image<S>],
    specs: &[TransformSpec],
    seeds: &[u64],
) -> Result<Vec<Vec<f64>>> {
    if seeds.len() != images.len() {
        return Err(Error::invalid("one seed per image required"));
    }
    for spec in specs {
        spec.validate()?;
    }
    let base: Vec<Vec<f64>> = logits_batch(model, images)?.iter().map(|l| softmax_f64(l)).collect();
    let mut out = vec![vec![0.0; specs.len()]; images.len()];
    for (t, spec) in specs.iter().enumerate() {
        let transformed = images
            .iter()
            .zip(seeds)
            .map(|(im, &s)| transform(im, spec, s))
            .collect::<Result<Vec<_>>>()?;
        for (k, row) in logits_batch(model, &transformed)?.iter().enumerate() {
            out[k][t] = kl_slices(&base[k], &softmax_f64(row))?.max(0.0);
        }
    }
    Ok(out)
}

use serde::{Deserialize, Serialize};

use super::Verdict;
use crate::error::{Error, Result};
use crate::transforms::TransformSpec;

/// Outcome of a threshold search on training scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFit {
    pub threshold: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub product: f64,
}

/// A fitted single-transform detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdModel {
    pub spec: TransformSpec,
    #[serde(flatten)]
    pub fit: ThresholdFit,
}

fn finite_scores(xs: &[f64], what: &str) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::invalid(format!("{what} scores are empty")));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(format!("{what} scores contain non-finite values")));
    }
    Ok(())
}

/// Picks the candidate `T` (any training score) maximizing TPR·TNR under
/// the rule "adversarial iff score > T". Ties go to the smallest `T`.
pub fn fit_threshold(benign: &[f64], adversarial: &[f64]) -> Result<ThresholdFit> {
    finite_scores(benign, "benign")?;
    finite_scores(adversarial, "adversarial")?;
    let mut b = benign.to_vec();
    let mut a = adversarial.to_vec();
    b.sort_by(f64::total_cmp);
    a.sort_by(f64::total_cmp);
    let mut candidates: Vec<f64> = b.iter().chain(&a).copied().collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let (nb, na) = (b.len() as f64, a.len() as f64);
    let (mut ib, mut ia) = (0usize, 0usize);
    let mut best: Option<ThresholdFit> = None;
    for &t in &candidates {
        // Advance to the count of scores <= t in each sorted list.
        while ib < b.len() && b[ib] <= t {
            ib += 1;
        }
        while ia < a.len() && a[ia] <= t {
            ia += 1;
        }
        let tpr = (a.len() - ia) as f64 / na;
        let tnr = ib as f64 / nb;
        let product = tpr * tnr;
        if best.is_none_or(|f| product > f.product) {
            best = Some(ThresholdFit {
                threshold: t,
                tpr,
                tnr,
                product,
            });
        }
    }
    Ok(best.expect("candidate set is nonempty"))
}

/// Adversarial iff `score > T`.
pub fn baseline_detect(score: f64, model: &ThresholdModel) -> Result<Verdict> {
    if score.is_nan() {
        return Err(Error::numeric("score is NaN"));
    }
    Ok(if score > model.fit.threshold {
        Verdict::Adversarial
    } else {
        Verdict::Benign
    })
}

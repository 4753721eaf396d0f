use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detector::Provenance;
use crate::error::Result;
use crate::metrics::{confusion, precision_recall_f1, roc_curve, ConfusionCounts};

/// Test-split performance of one detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorReport {
    pub name: String,
    pub params: String,
    pub threshold: f64,
    /// Fraction of each source judged correctly: benign as benign, every
    /// attack as adversarial.
    pub accuracy: BTreeMap<String, f64>,
    /// Mean detector score per source.
    pub mean_score: BTreeMap<String, f64>,
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `f1` to two decimals, the precision tables are usually quoted at.
    pub f1_rounded: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub degenerate: bool,
    pub auc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roc: Option<Vec<(f64, f64)>>,
}

/// Evaluates "adversarial iff score > threshold" on labelled scores.
pub fn evaluate_scores(
    name: &str,
    params: &str,
    threshold: f64,
    scores: &[f64],
    sources: &[Provenance],
    keep_roc: bool,
) -> Result<DetectorReport> {
    let truths: Vec<bool> = sources.iter().map(|s| s.is_adversarial()).collect();
    let verdicts: Vec<bool> = scores.iter().map(|&s| s > threshold).collect();
    let counts = confusion(&verdicts, &truths)?;
    let m = precision_recall_f1(&counts);
    let curve = roc_curve(scores, &truths)?;
    let mut totals: BTreeMap<String, (usize, usize, f64)> = BTreeMap::new();
    for ((&src, &v), &s) in sources.iter().zip(&verdicts).zip(scores) {
        let e = totals.entry(src.name().to_string()).or_default();
        e.0 += 1;
        e.1 += usize::from(v == src.is_adversarial());
        e.2 += s;
    }
    Ok(DetectorReport {
        name: name.to_string(),
        params: params.to_string(),
        threshold,
        accuracy: totals.iter().map(|(k, &(n, ok, _))| (k.clone(), ok as f64 / n as f64)).collect(),
        mean_score: totals.iter().map(|(k, &(n, _, sum))| (k.clone(), sum / n as f64)).collect(),
        counts,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        f1_rounded: (m.f1 * 100.0).round() / 100.0,
        tpr: m.tpr,
        tnr: m.tnr,
        degenerate: m.degenerate,
        auc: curve.auc,
        roc: keep_roc.then_some(curve.points),
    })
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Median score per source for one transform over all scored images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub transform: String,
    pub median: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub method: String,
    pub attacked: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub shortfall: usize,
    pub skipped_misclassified: usize,
    pub mean_l2: f64,
    pub mean_linf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub train_benign: usize,
    pub train_adversarial: BTreeMap<String, usize>,
    pub test_benign: usize,
    pub test_adversarial: BTreeMap<String, usize>,
}

/// Contents of `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    pub seed: u64,
    pub dataset: String,
    pub classifier_test_accuracy: f64,
    pub attacks: Vec<AttackSummary>,
    pub adversarial_originals: String,
    pub samples: SampleCounts,
    /// One threshold detector per suite entry, then the judge.
    pub detectors: Vec<DetectorReport>,
    /// Threshold detectors for the full parameter sweep, if run.
    pub sweep: Vec<DetectorReport>,
    pub separation: Vec<Separation>,
}

impl Report {
    pub fn judge(&self) -> Option<&DetectorReport> {
        self.detectors.iter().find(|d| d.name == super::JUDGE_NAME)
    }

    pub fn individual(&self) -> impl Iterator<Item = &DetectorReport> {
        self.detectors.iter().filter(|d| d.name != super::JUDGE_NAME)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_source_accuracy() {
        use Provenance::*;
        let r = evaluate_scores("t", "p", 0.5, &[0.1, 0.9, 0.7, 0.2, 0.6], &[Benign, Benign, Cw, Fgsm, Fgsm], true).unwrap();
        assert_eq!(r.accuracy["benign"], 0.5);
        assert_eq!(r.accuracy["cw"], 1.0);
        assert_eq!(r.accuracy["fgsm"], 0.5);
        assert!((r.mean_score["fgsm"] - 0.4).abs() < 1e-15);
        assert_eq!(r.counts, ConfusionCounts { tp: 2, fp: 1, tn: 1, fn_: 1 });
        assert!(r.roc.is_some());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }
}

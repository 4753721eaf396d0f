//! Detection metrics with "adversarial" as the positive class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Counts from predicted and true labels (`true` = adversarial).
pub fn confusion(verdicts: &[bool], truths: &[bool]) -> Result<ConfusionCounts> {
    if verdicts.len() != truths.len() {
        return Err(Error::invalid(format!(
            "{} verdicts but {} truths",
            verdicts.len(),
            truths.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&v, &t) in verdicts.iter().zip(truths) {
        match (v, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tpr: f64,
    pub tnr: f64,
    /// Some ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

fn ratio(num: usize, den: usize, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn precision_recall_f1(c: &ConfusionCounts) -> Metrics {
    let mut degenerate = false;
    let precision = ratio(c.tp, c.tp + c.fp, &mut degenerate);
    let recall = ratio(c.tp, c.tp + c.fn_, &mut degenerate);
    let tnr = ratio(c.tn, c.tn + c.fp, &mut degenerate);
    if precision + recall == 0.0 {
        degenerate = true;
    }
    Metrics {
        precision,
        recall,
        f1: f1_score(precision, recall),
        tpr: recall,
        tnr,
        degenerate,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0,0)` to `(1,1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Sweeps every distinct score as a threshold from high to low, moving
/// tied scores together.
pub fn roc_curve(scores: &[f64], truths: &[bool]) -> Result<RocCurve> {
    if scores.len() != truths.len() {
        return Err(Error::invalid("one truth per score required"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::numeric("scores contain NaN"));
    }
    let pos = truths.iter().filter(|&&t| t).count();
    let neg = truths.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("ROC needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if truths[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = auc(&points)?;
    Ok(RocCurve { points, auc })
}

/// Trapezoidal area under `(fpr, tpr)` points sorted by fpr.
pub fn auc(points: &[(f64, f64)]) -> Result<f64> {
    if points.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(Error::invalid("ROC points must be sorted by false-positive rate"));
    }
    Ok(points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_enumeration() {
        let c = confusion(&[true, true, false], &[true, false, false]).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 1, tn: 1, fn_: 0 });
        assert_eq!(confusion(&[], &[]).unwrap(), ConfusionCounts::default());
        assert!(confusion(&[true], &[]).is_err());
    }

    #[test]
    fn prf_values() {
        let m = precision_recall_f1(&ConfusionCounts { tp: 2, fp: 1, tn: 0, fn_: 0 });
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.recall, 1.0);
        assert!((m.f1 - 0.8).abs() < 1e-15);
        assert_eq!(m.tnr, 0.0);
        assert!(!m.degenerate);
        let perfect = precision_recall_f1(&ConfusionCounts { tp: 3, fp: 0, tn: 2, fn_: 0 });
        assert_eq!(perfect.f1, 1.0);
        assert!(!perfect.degenerate);
        let empty = precision_recall_f1(&ConfusionCounts::default());
        assert!(empty.degenerate && empty.f1 == 0.0);
    }

    #[test]
    fn roc_edges() {
        let c = roc_curve(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert!(c.points.contains(&(0.0, 1.0)));
        assert_eq!(c.auc, 1.0);
        assert_eq!(*c.points.first().unwrap(), (0.0, 0.0));
        assert_eq!(*c.points.last().unwrap(), (1.0, 1.0));
        assert_eq!(auc(&[(0.0, 0.0), (1.0, 1.0)]).unwrap(), 0.5);
        assert!(auc(&[(0.5, 0.0), (0.2, 1.0)]).is_err());
        assert!(roc_curve(&[0.1, 0.2], &[true, true]).is_err());
    }
}

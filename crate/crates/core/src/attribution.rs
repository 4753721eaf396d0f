//! Integrated-gradients attribution of judge outputs to the nine features.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::detector::{judge, FeatureVector, JudgeModel, Provenance, Verdict};
use crate::error::{Error, Result};
use crate::numerics::BackwardOptions;
use crate::scalar::Scalar;
use crate::transforms::{Family, SUITE_LEN};

pub const DEFAULT_STEPS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionVector {
    pub values: [f64; SUITE_LEN],
    pub baseline: [f64; SUITE_LEN],
    pub steps: usize,
    /// `ρ(v)` and `ρ(baseline)`.
    pub output: f64,
    pub baseline_output: f64,
    /// `|Σ IG − (ρ(v) − ρ(baseline))|`.
    pub completeness_gap: f64,
}

impl AttributionVector {
    /// Completeness gap relative to `max(1, |ρ(v) − ρ(baseline)|)`.
    pub fn relative_gap(&self) -> f64 {
        self.completeness_gap / (self.output - self.baseline_output).abs().max(1.0)
    }
}

fn as_array(v: &[f64], what: &str) -> Result<[f64; SUITE_LEN]> {
    v.try_into()
        .map_err(|_| Error::invalid(format!("{what} must hold {SUITE_LEN} entries, got {}", v.len())))
}

/// Midpoint-Riemann integrated gradients of `ρ` along the straight path
/// from `baseline` to `v`:
/// `IG_i = (v_i − b_i) / steps · Σ_k ∂ρ/∂v_i (b + (k − ½)/steps · (v − b))`.
pub fn integrated_gradients<S: Scalar>(
    model: &JudgeModel<S>,
    v: &[f64],
    baseline: &[f64],
    steps: usize,
) -> Result<AttributionVector> {
    let v = as_array(v, "feature vector")?;
    let baseline = as_array(baseline, "baseline")?;
    if steps == 0 {
        return Err(Error::invalid("integrated gradients needs at least one step"));
    }
    let mut batch = Vec::with_capacity(steps * SUITE_LEN);
    for k in 0..steps {
        let alpha = (k as f64 + 0.5) / steps as f64;
        let point: Vec<f64> = baseline.iter().zip(&v).map(|(b, x)| b + alpha * (x - b)).collect();
        batch.extend(model.prepare(&point)?);
    }
    let net = &model.network;
    let (_, trace) = net.forward_batch(&batch, steps)?;
    let opts = BackwardOptions {
        param_grads: false,
        input_grad: true,
        upstream_is_preactivation: false,
    };
    let (_, grads) = net.backward_batch(&trace, &vec![S::one(); steps], opts)?;
    let grads = grads.expect("requested");
    let scale = model.input_scale();
    let mut values = [0.0; SUITE_LEN];
    for (i, val) in values.iter_mut().enumerate() {
        let total: f64 = (0..steps).map(|k| grads[k * SUITE_LEN + i].to_f64_lossy()).sum();
        *val = (v[i] - baseline[i]) * scale[i] * total / steps as f64;
    }
    let output = judge(model, &v)?.0;
    let baseline_output = judge(model, &baseline)?.0;
    let completeness_gap = (values.iter().sum::<f64>() - (output - baseline_output)).abs();
    Ok(AttributionVector {
        values,
        baseline,
        steps,
        output,
        baseline_output,
        completeness_gap,
    })
}

/// Average attributions over the test vectors the judge calls benign and
/// over those it calls adversarial, both signed and by magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub benign_signed: [f64; SUITE_LEN],
    pub benign_magnitude: [f64; SUITE_LEN],
    pub benign_count: usize,
    pub adversarial_signed: [f64; SUITE_LEN],
    pub adversarial_magnitude: [f64; SUITE_LEN],
    pub adversarial_count: usize,
    /// Set when a partition is empty; its vectors are then all zero.
    pub benign_empty: bool,
    pub adversarial_empty: bool,
}

pub fn mean_feature_importance<S: Scalar>(
    model: &JudgeModel<S>,
    features: &[[f64; SUITE_LEN]],
    baseline: &[f64],
    steps: usize,
) -> Result<FeatureImportance> {
    if features.is_empty() {
        return Err(Error::invalid("feature importance needs at least one vector"));
    }
    let mut sums = [[0.0; SUITE_LEN]; 4];
    let (mut nb, mut na) = (0usize, 0usize);
    for f in features {
        let ig = integrated_gradients(model, f, baseline, steps)?;
        let adv = judge(model, f)?.1.is_adversarial();
        let (signed, mag) = if adv {
            na += 1;
            (2, 3)
        } else {
            nb += 1;
            (0, 1)
        };
        for i in 0..SUITE_LEN {
            sums[signed][i] += ig.values[i];
            sums[mag][i] += ig.values[i].abs();
        }
    }
    let mean = |s: [f64; SUITE_LEN], n: usize| if n == 0 { [0.0; SUITE_LEN] } else { s.map(|v| v / n as f64) };
    Ok(FeatureImportance {
        benign_signed: mean(sums[0], nb),
        benign_magnitude: mean(sums[1], nb),
        benign_count: nb,
        adversarial_signed: mean(sums[2], na),
        adversarial_magnitude: mean(sums[3], na),
        adversarial_count: na,
        benign_empty: nb == 0,
        adversarial_empty: na == 0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub transform: String,
    pub score: f64,
    pub attribution: f64,
}

/// Judge output for one image with a per-transform score/attribution table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub rho: f64,
    pub verdict: Verdict,
    pub provenance: Provenance,
    pub rows: Vec<CaseRow>,
    pub completeness_gap: f64,
}

impl CaseReport {
    pub fn is_false_negative(&self) -> bool {
        self.provenance.is_adversarial() && self.verdict == Verdict::Benign
    }

    pub fn is_false_positive(&self) -> bool {
        !self.provenance.is_adversarial() && self.verdict == Verdict::Adversarial
    }
}

/// Zero baseline, default step count.
pub fn case_report<S: Scalar>(model: &JudgeModel<S>, v: &FeatureVector) -> Result<CaseReport> {
    case_report_with_steps(model, v, DEFAULT_STEPS)
}

pub fn case_report_with_steps<S: Scalar>(model: &JudgeModel<S>, v: &FeatureVector, steps: usize) -> Result<CaseReport> {
    let (rho, verdict) = judge(model, &v.values)?;
    let ig = integrated_gradients(model, &v.values, &[0.0; SUITE_LEN], steps)?;
    let rows = Family::ALL
        .iter()
        .zip(v.values.iter().zip(ig.values))
        .map(|(f, (&score, attribution))| CaseRow {
            transform: f.column().to_string(),
            score,
            attribution,
        })
        .collect();
    Ok(CaseReport {
        rho,
        verdict,
        provenance: v.provenance,
        rows,
        completeness_gap: ig.completeness_gap,
    })
}

/// One attribution table row.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributionRow {
    pub image_id: String,
    pub rho: f64,
    pub verdict: Verdict,
    pub scores: [f64; SUITE_LEN],
    pub attributions: [f64; SUITE_LEN],
}

pub fn attributions_csv_header() -> Vec<String> {
    let mut h: Vec<String> = ["image_id", "rho", "verdict"].map(String::from).to_vec();
    h.extend(Family::ALL.iter().map(|f| format!("score_{}", f.column())));
    h.extend(Family::ALL.iter().map(|f| format!("ig_{}", f.column())));
    h
}

pub fn write_attributions_csv<W: Write>(w: W, rows: &[AttributionRow]) -> Result<()> {
    let err = |e: csv::Error| Error::format(format!("csv: {e}"));
    let mut out = csv::Writer::from_writer(w);
    out.write_record(attributions_csv_header()).map_err(err)?;
    for r in rows {
        let verdict = if r.verdict.is_adversarial() { "adversarial" } else { "benign" };
        let mut rec = vec![r.image_id.clone(), r.rho.to_string(), verdict.to_string()];
        rec.extend(r.scores.iter().chain(&r.attributions).map(f64::to_string));
        out.write_record(&rec).map_err(err)?;
    }
    out.flush().map_err(|e| Error::format(format!("csv: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Activation, LayerSpec, Network};

    fn linear_judge(w: [f64; SUITE_LEN]) -> JudgeModel<f64> {
        let mut net = Network::zeroed(&[SUITE_LEN], &[LayerSpec::Dense { outputs: 1, activation: Activation::None }]).unwrap();
        net.params_mut()[0].copy_from_slice(&w);
        JudgeModel::from_network(net).unwrap()
    }

    #[test]
    fn linear_model_is_exact() {
        let w = [0.5, -1.0, 2.0, 0.0, 3.0, -0.25, 1.5, 0.75, -2.0];
        let v = [1.0, 2.0, 0.5, 4.0, 0.1, 0.2, 0.3, 3.0, 1.25];
        for steps in [1, 7, 200] {
            let ig = integrated_gradients(&linear_judge(w), &v, &[0.0; SUITE_LEN], steps).unwrap();
            for i in 0..SUITE_LEN {
                assert!((ig.values[i] - w[i] * v[i]).abs() <= 1e-12);
            }
            assert!(ig.completeness_gap <= 1e-9);
        }
    }

    #[test]
    fn zero_path_gives_zero() {
        let m = linear_judge([1.0; SUITE_LEN]);
        let v = [0.3; SUITE_LEN];
        let ig = integrated_gradients(&m, &v, &v, 10).unwrap();
        assert_eq!(ig.values, [0.0; SUITE_LEN]);
        assert!(integrated_gradients(&m, &v[..4], &v, 10).is_err());
        assert!(integrated_gradients(&m, &v, &v, 0).is_err());
    }

    #[test]
    fn case_report_is_consistent() {
        let m = linear_judge([1.0; SUITE_LEN]);
        let fv = FeatureVector {
            values: [-0.1; SUITE_LEN],
            provenance: Provenance::Cw,
        };
        let r = case_report(&m, &fv).unwrap();
        assert_eq!(r.rows.len(), SUITE_LEN);
        assert_eq!(r.rho, judge(&m, &fv.values).unwrap().0);
        assert!(r.is_false_negative());
    }

    #[test]
    fn importance_of_identical_inputs_equals_single() {
        let m = linear_judge([0.5; SUITE_LEN]);
        let v = [2.0; SUITE_LEN];
        let imp = mean_feature_importance(&m, &[v, v, v], &[0.0; SUITE_LEN], 5).unwrap();
        let single = integrated_gradients(&m, &v, &[0.0; SUITE_LEN], 5).unwrap();
        assert_eq!(imp.adversarial_signed, single.values);
        assert!(imp.benign_empty && imp.benign_count == 0);
    }
}

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

/// Probability floor used by every logarithm over a distribution.
pub const PROB_FLOOR: f64 = 1e-12;

/// Classifier output distribution over classes.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector<S> {
    probs: Vec<S>,
}

impl<S: Scalar> ProbVector<S> {
    /// Validates that every entry lies in [0,1] and the entries sum to 1 within 1e-6.
    pub fn new(probs: Vec<S>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("probability vector is empty"));
        }
        let mut total = 0.0f64;
        for p in &probs {
            let p = p.to_f64_lossy();
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("probability {p} outside [0,1]")));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(ProbVector { probs })
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the largest probability; the first wins ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }

    pub fn cast<T: Scalar>(&self) -> ProbVector<T> {
        ProbVector {
            probs: self.probs.iter().map(|p| T::from_f64_lossy(p.to_f64_lossy())).collect(),
        }
    }
}

pub(crate) fn argmax<S: Scalar>(values: &[S]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Max-subtracted softmax written into `out`.
pub(crate) fn softmax_into<S: Scalar>(logits: &[S], out: &mut [S]) {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let mut total = S::zero();
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

pub fn softmax<S: Scalar>(logits: &Tensor<S>) -> Result<ProbVector<S>> {
    if logits.rank() != 1 {
        return Err(Error::invalid(format!("softmax expects rank-1 logits, got shape {:?}", logits.shape())));
    }
    if !logits.is_finite() {
        return Err(Error::invalid("softmax input contains non-finite values"));
    }
    let mut probs = vec![S::zero(); logits.len()];
    softmax_into(logits.data(), &mut probs);
    Ok(ProbVector { probs })
}

/// `-ln(max(probs[label], 1e-12))`.
pub fn cross_entropy<S: Scalar>(probs: &ProbVector<S>, label: usize) -> Result<S> {
    let p = probs
        .probs
        .get(label)
        .ok_or_else(|| Error::invalid(format!("label {label} out of range for {} classes", probs.len())))?;
    Ok(-p.max(S::from_f64_lossy(PROB_FLOOR)).ln())
}

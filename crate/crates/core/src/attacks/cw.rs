//! Carlini-Wagner L2 targeted attack.
//!
//! Minimizes `||δ||₂ + c · max(max_{i≠t} Z(x')_i − Z(x')_t, −k)` over
//! `w` with `x' = (tanh(w) + 1) / 2`, so `x'` always lies in [0,1]. The
//! constant `c` is searched per image: it grows tenfold until an attack
//! succeeds, then bisects between the largest failing and smallest
//! succeeding value. The smallest-L2 success over all iterations is kept.

use serde::{Deserialize, Serialize};

use super::{check_batch, finish_records, target_margin, AdversarialRecord};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::numerics::{argmax, BackwardOptions, Network};
use crate::scalar::Scalar;

/// Scaling applied before `atanh` so pixels at 0 or 1 map to finite `w`.
const TANH_SHRINK: f64 = 1.0 - 1e-6;
const UPPER_UNSET: f64 = 1e10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CwConfig {
    /// Required logit margin `k` of the target over every other class.
    pub confidence: f64,
    pub initial_c: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub binary_search_steps: usize,
    /// Stop an inner run once the objective stalls over a tenth of the
    /// iteration budget.
    pub abort_early: bool,
}

impl Default for CwConfig {
    fn default() -> Self {
        CwConfig {
            confidence: 0.0,
            initial_c: 1e-2,
            learning_rate: 1e-2,
            iterations: 200,
            binary_search_steps: 5,
            abort_early: true,
        }
    }
}

impl CwConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.confidence >= 0.0 && self.confidence.is_finite()) {
            return Err(Error::invalid("confidence must be finite and >= 0"));
        }
        if !(self.initial_c > 0.0 && self.initial_c.is_finite()) {
            return Err(Error::invalid("initial c must be > 0"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be > 0"));
        }
        if self.iterations == 0 || self.binary_search_steps == 0 {
            return Err(Error::invalid("iterations and binary search steps must be >= 1"));
        }
        Ok(())
    }
}

/// Per-image optimizer state for one inner run.
struct Inner {
    w: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    prev_objective: f64,
    active: bool,
    succeeded: bool,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Inner {
    fn new(w0: &[f64]) -> Self {
        Inner {
            w: w0.to_vec(),
            m: vec![0.0; w0.len()],
            v: vec![0.0; w0.len()],
            step: 0,
            prev_objective: f64::INFINITY,
            active: true,
            succeeded: false,
        }
    }

    fn adam(&mut self, grad: &[f64], lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - BETA1.powi(self.step);
        let bc2 = 1.0 - BETA2.powi(self.step);
        for i in 0..self.w.len() {
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * grad[i];
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * grad[i] * grad[i];
            self.w[i] -= lr * (self.m[i] / bc1) / ((self.v[i] / bc2).sqrt() + ADAM_EPS);
        }
    }
}

fn to_image<S: Scalar>(w: &[f64], like: &Image<S>) -> Result<Image<S>> {
    let [c, h, wd] = like.shape();
    Image::clipped(c, h, wd, w.iter().map(|&v| S::from_f64_lossy((v.tanh() + 1.0) / 2.0)).collect())
}

/// Targeted C&W-L2 on a batch. Failed images come back with
/// `success = false` and the unmodified original as the adversarial image.
pub fn cw_l2_batch<S: Scalar>(
    model: &Network<S>,
    images: &[Image<S>],
    labels: &[usize],
    targets: &[usize],
    cfg: &CwConfig,
) -> Result<Vec<AdversarialRecord<S>>> {
    cfg.validate()?;
    check_batch(model, images, labels)?;
    check_batch(model, images, targets)?;
    let n = images.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let len = model.input_len();
    let classes = model.num_outputs();
    let originals: Vec<Vec<f64>> = images
        .iter()
        .map(|im| im.pixels().iter().map(|p| p.to_f64_lossy()).collect())
        .collect();
    let w0: Vec<Vec<f64>> = originals
        .iter()
        .map(|x| x.iter().map(|&p| ((2.0 * p - 1.0) * TANH_SHRINK).atanh()).collect())
        .collect();

    let mut c = vec![cfg.initial_c; n];
    let mut lower = vec![0.0f64; n];
    let mut upper = vec![UPPER_UNSET; n];
    let mut best_l2 = vec![f64::INFINITY; n];
    let mut best: Vec<Option<Image<S>>> = vec![None; n];
    let check_every = (cfg.iterations / 10).max(1);
    let opts = BackwardOptions {
        param_grads: false,
        input_grad: true,
        upstream_is_preactivation: false,
    };

    for _ in 0..cfg.binary_search_steps {
        let mut inner: Vec<Inner> = w0.iter().map(|w| Inner::new(w)).collect();
        for it in 0..cfg.iterations {
            let active: Vec<usize> = (0..n).filter(|&k| inner[k].active).collect();
            if active.is_empty() {
                break;
            }
            let mut batch_x = Vec::with_capacity(active.len() * len);
            let mut candidates = Vec::with_capacity(active.len());
            for &k in &active {
                let img = to_image(&inner[k].w, &images[k])?;
                batch_x.extend_from_slice(img.pixels());
                candidates.push(img);
            }
            let (logits, trace) = model.forward_batch(&batch_x, active.len())?;
            let mut upstream = vec![S::zero(); logits.len()];
            let mut objective = vec![0.0; active.len()];
            let mut dist_grad = vec![Vec::new(); active.len()];
            for (j, &k) in active.iter().enumerate() {
                let row = &logits[j * classes..(j + 1) * classes];
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::numeric("non-finite logits during C&W"));
                }
                let t = targets[k];
                let margin = target_margin(row, t);
                let delta: Vec<f64> = candidates[j]
                    .pixels()
                    .iter()
                    .zip(&originals[k])
                    .map(|(a, o)| a.to_f64_lossy() - o)
                    .collect();
                let l2 = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
                if argmax(row) == t && margin >= cfg.confidence {
                    inner[k].succeeded = true;
                    if l2 < best_l2[k] {
                        best_l2[k] = l2;
                        best[k] = Some(candidates[j].clone());
                    }
                }
                // Hinge on -margin: active while the target lead is below k.
                let hinge = (-margin).max(-cfg.confidence);
                objective[j] = l2 + c[k] * hinge;
                if -margin > -cfg.confidence {
                    let other = (0..classes)
                        .filter(|&i| i != t)
                        .max_by(|&a, &b| row[a].to_f64_lossy().total_cmp(&row[b].to_f64_lossy()).then(b.cmp(&a)))
                        .expect("at least two classes");
                    upstream[j * classes + other] = S::from_f64_lossy(c[k]);
                    upstream[j * classes + t] = S::from_f64_lossy(-c[k]);
                }
                dist_grad[j] = if l2 > 0.0 {
                    delta.iter().map(|d| d / l2).collect()
                } else {
                    vec![0.0; len]
                };
            }
            let (_, gx) = model.backward_batch(&trace, &upstream, opts)?;
            let gx = gx.expect("requested");
            for (j, &k) in active.iter().enumerate() {
                let st = &mut inner[k];
                let grad_w: Vec<f64> = (0..len)
                    .map(|i| {
                        let g = gx[j * len + i].to_f64_lossy() + dist_grad[j][i];
                        let th = st.w[i].tanh();
                        g * (1.0 - th * th) / 2.0
                    })
                    .collect();
                st.adam(&grad_w, cfg.learning_rate);
                if cfg.abort_early && (it + 1) % check_every == 0 {
                    if objective[j] > st.prev_objective * 0.9999 {
                        st.active = false;
                    }
                    st.prev_objective = objective[j];
                }
            }
        }
        for k in 0..n {
            if inner[k].succeeded {
                upper[k] = upper[k].min(c[k]);
                c[k] = (lower[k] + upper[k]) / 2.0;
            } else {
                lower[k] = lower[k].max(c[k]);
                c[k] = if upper[k] < UPPER_UNSET {
                    (lower[k] + upper[k]) / 2.0
                } else {
                    c[k] * 10.0
                };
            }
        }
    }

    let adversarials: Vec<Image<S>> = best
        .into_iter()
        .zip(images)
        .map(|(b, im)| b.unwrap_or_else(|| im.clone()))
        .collect();
    finish_records(model, images, adversarials, labels, Some((targets, cfg.confidence)))
}

pub fn cw_l2<S: Scalar>(
    model: &Network<S>,
    image: &Image<S>,
    label: usize,
    target: usize,
    cfg: &CwConfig,
) -> Result<AdversarialRecord<S>> {
    Ok(cw_l2_batch(model, std::slice::from_ref(image), &[label], &[target], cfg)?.remove(0))
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Verdict;
use crate::error::{Error, Result};
use std::path::Path;

use crate::numerics::{
    adam_step, load_checkpoint, save_checkpoint, Activation, AdamState, BackwardOptions, LayerSpec, Network, Tensor,
    PROB_FLOOR,
};
use crate::scalar::Scalar;
use crate::transforms::SUITE_LEN;

pub const JUDGE_WIDTH: usize = 64;
const JUDGE_HIDDEN_LAYERS: usize = 4;

/// 9 → 64 → 64 → 64 → 64 → 1, relu hidden layers and a sigmoid output.
pub fn judge_architecture() -> Vec<LayerSpec> {
    let mut specs = vec![
        LayerSpec::Dense {
            outputs: JUDGE_WIDTH,
            activation: Activation::Relu,
        };
        JUDGE_HIDDEN_LAYERS
    ];
    specs.push(LayerSpec::Dense {
        outputs: 1,
        activation: Activation::Sigmoid,
    });
    specs
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgeConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Standardize each feature with training mean and deviation.
    pub normalize: bool,
    pub seed: u64,
}

impl JudgeConfig {
    pub fn new(seed: u64) -> Self {
        JudgeConfig {
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 64,
            normalize: false,
            seed,
        }
    }
}

/// The judge network plus optional input standardization.
#[derive(Clone, Debug, PartialEq)]
pub struct JudgeModel<S> {
    pub network: Network<S>,
    /// Per-feature `(mean, std)` applied before the network.
    pub normalization: Option<Vec<(f64, f64)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgeTrainLog {
    pub epoch_losses: Vec<f64>,
    pub final_accuracy: f64,
}

impl<S: Scalar> JudgeModel<S> {
    /// Plain network without normalization; the network must take 9 inputs
    /// and produce one output.
    pub fn from_network(network: Network<S>) -> Result<Self> {
        if network.input_len() != SUITE_LEN || network.num_outputs() != 1 {
            return Err(Error::invalid("judge network must map 9 features to 1 output"));
        }
        Ok(JudgeModel {
            network,
            normalization: None,
        })
    }

    /// Network input for a raw feature vector.
    pub fn prepare(&self, v: &[f64]) -> Result<Vec<S>> {
        if v.len() != SUITE_LEN {
            return Err(Error::invalid(format!("judge expects {SUITE_LEN} features, got {}", v.len())));
        }
        Ok(match &self.normalization {
            Some(stats) => v
                .iter()
                .zip(stats)
                .map(|(&x, &(m, s))| S::from_f64_lossy((x - m) / s))
                .collect(),
            None => v.iter().map(|&x| S::from_f64_lossy(x)).collect(),
        })
    }

    /// Scale factors mapping gradients w.r.t. network input back to raw features.
    pub fn input_scale(&self) -> [f64; SUITE_LEN] {
        let mut out = [1.0; SUITE_LEN];
        if let Some(stats) = &self.normalization {
            for (o, &(_, s)) in out.iter_mut().zip(stats) {
                *o = 1.0 / s;
            }
        }
        out
    }
}

/// Writes the judge as an ADVJ checkpoint; the normalization statistics go
/// into the metadata under `"normalization"` next to the caller's entries.
pub fn save_judge<S: Scalar>(path: &Path, model: &JudgeModel<S>, meta: serde_json::Value) -> Result<()> {
    let mut meta = match meta {
        serde_json::Value::Object(m) => m,
        serde_json::Value::Null => serde_json::Map::new(),
        _ => return Err(Error::invalid("judge metadata must be a JSON object")),
    };
    meta.insert("normalization".into(), serde_json::to_value(&model.normalization)?);
    save_checkpoint(path, &model.network, serde_json::Value::Object(meta))
}

pub fn load_judge<S: Scalar>(path: &Path) -> Result<(JudgeModel<S>, serde_json::Value)> {
    let (network, meta) = load_checkpoint(path)?;
    let mut model = JudgeModel::from_network(network)?;
    if let Some(n) = meta.get("normalization") {
        model.normalization = serde_json::from_value(n.clone())?;
    }
    if model.normalization.as_ref().is_some_and(|n| n.len() != SUITE_LEN) {
        return Err(Error::format("judge normalization must hold one entry per feature"));
    }
    Ok((model, meta))
}

/// `ρ` for a raw feature vector and the verdict "adversarial iff ρ > 0.5".
pub fn judge<S: Scalar>(model: &JudgeModel<S>, v: &[f64]) -> Result<(f64, Verdict)> {
    let input = model.prepare(v)?;
    let rho = model.network.forward(&Tensor::vector(input)?)?.data()[0].to_f64_lossy();
    let verdict = if rho > 0.5 { Verdict::Adversarial } else { Verdict::Benign };
    Ok((rho, verdict))
}

fn normalization(features: &[[f64; SUITE_LEN]]) -> Vec<(f64, f64)> {
    let n = features.len() as f64;
    (0..SUITE_LEN)
        .map(|j| {
            let mean = features.iter().map(|f| f[j]).sum::<f64>() / n;
            let var = features.iter().map(|f| (f[j] - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            (mean, if std > 1e-12 { std } else { 1.0 })
        })
        .collect()
}

/// Binary cross-entropy training with Adam; labels are 1 for adversarial.
pub fn train_judge<S: Scalar>(
    features: &[[f64; SUITE_LEN]],
    labels: &[bool],
    cfg: &JudgeConfig,
) -> Result<(JudgeModel<S>, JudgeTrainLog)> {
    if features.len() != labels.len() {
        return Err(Error::invalid("one label per feature vector required"));
    }
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(Error::invalid("judge training needs both benign and adversarial examples"));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::invalid("judge epochs, batch size and learning rate must be positive"));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::numeric("judge features contain non-finite values"));
    }
    let network = Network::new(&[SUITE_LEN], &judge_architecture(), cfg.seed)?;
    let mut model = JudgeModel {
        network,
        normalization: cfg.normalize.then(|| normalization(features)),
    };
    let inputs: Vec<Vec<S>> = features.iter().map(|f| model.prepare(f)).collect::<Result<_>>()?;
    let mut adam = AdamState::for_network(&model.network);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x1D6E_5EED);
    let mut order: Vec<usize> = (0..features.len()).collect();
    let opts = BackwardOptions {
        param_grads: true,
        input_grad: false,
        upstream_is_preactivation: true,
    };
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut batch = Vec::with_capacity(cfg.batch_size * SUITE_LEN);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            for &i in chunk {
                batch.extend_from_slice(&inputs[i]);
            }
            let (rho, trace) = model.network.forward_batch(&batch, chunk.len())?;
            let inv_n = 1.0 / chunk.len() as f64;
            // For a sigmoid output, d BCE / d pre-activation = ρ - y.
            let upstream: Vec<S> = rho
                .iter()
                .zip(chunk)
                .map(|(&r, &i)| {
                    let r = r.to_f64_lossy();
                    let y = if labels[i] { 1.0 } else { 0.0 };
                    loss -= y * r.max(PROB_FLOOR).ln() + (1.0 - y) * (1.0 - r).max(PROB_FLOOR).ln();
                    S::from_f64_lossy((r - y) * inv_n)
                })
                .collect();
            let (grads, _) = model.network.backward_batch(&trace, &upstream, opts)?;
            adam_step(&mut model.network, &grads.expect("requested"), &mut adam, cfg.learning_rate)?;
        }
        let mean = loss / features.len() as f64;
        if !mean.is_finite() {
            return Err(Error::numeric(format!("judge loss diverged in epoch {epoch}")));
        }
        epoch_losses.push(mean);
    }
    let mut correct = 0usize;
    for (f, &l) in features.iter().zip(labels) {
        correct += usize::from(judge(&model, f)?.1.is_adversarial() == l);
    }
    let log = JudgeTrainLog {
        epoch_losses,
        final_accuracy: correct as f64 / features.len() as f64,
    };
    Ok((model, log))
}

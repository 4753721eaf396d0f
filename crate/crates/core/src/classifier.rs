//! The target image classifier: training, prediction and input gradients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledImageSet;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::numerics::{
    adam_step, argmax, softmax_into, Activation, AdamState, BackwardOptions, LayerSpec, Network,
    ProbVector, Tensor, PROB_FLOOR,
};
use crate::scalar::Scalar;

/// Batch size used when only inference is needed.
const INFERENCE_BATCH: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// conv3x3x32-relu-pool, conv3x3x64-relu-pool, fc256-relu, fc classes.
    Desk,
    /// conv3x3x8-relu-pool, fc32-relu, fc classes. For tests and smoke runs.
    Tiny,
}

impl Architecture {
    pub fn layers(self, num_classes: usize) -> Vec<LayerSpec> {
        let relu = Activation::Relu;
        match self {
            Architecture::Desk => vec![
                LayerSpec::Conv { out_channels: 32, activation: relu },
                LayerSpec::MaxPool,
                LayerSpec::Conv { out_channels: 64, activation: relu },
                LayerSpec::MaxPool,
                LayerSpec::Dense { outputs: 256, activation: relu },
                LayerSpec::Dense { outputs: num_classes, activation: Activation::None },
            ],
            Architecture::Tiny => vec![
                LayerSpec::Conv { out_channels: 8, activation: relu },
                LayerSpec::MaxPool,
                LayerSpec::Dense { outputs: 32, activation: relu },
                LayerSpec::Dense { outputs: num_classes, activation: Activation::None },
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub architecture: Architecture,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl ClassifierConfig {
    pub fn mnist(seed: u64) -> Self {
        ClassifierConfig {
            architecture: Architecture::Desk,
            epochs: 10,
            batch_size: 64,
            learning_rate: 1e-3,
            seed,
        }
    }

    pub fn cifar10(seed: u64) -> Self {
        ClassifierConfig {
            epochs: 30,
            ..Self::mnist(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub final_train_accuracy: f64,
    pub final_test_accuracy: Option<f64>,
}

fn flatten<S: Scalar>(images: &[Image<S>]) -> Vec<S> {
    images.iter().flat_map(|im| im.pixels().iter().copied()).collect()
}

fn check_shape<S: Scalar>(model: &Network<S>, image: &Image<S>) -> Result<()> {
    if model.input_shape() != image.shape() {
        return Err(Error::invalid(format!(
            "image shape {:?} does not match model input {:?}",
            image.shape(),
            model.input_shape()
        )));
    }
    Ok(())
}

/// Trains a fresh network with Adam on softmax cross-entropy.
///
/// The optional test set is only evaluated for the log.
pub fn train_classifier<S: Scalar>(
    train: &LabeledImageSet<S>,
    test: Option<&LabeledImageSet<S>>,
    cfg: &ClassifierConfig,
) -> Result<(Network<S>, TrainingLog)> {
    cfg.validate()?;
    let shape = train
        .image_shape()
        .ok_or_else(|| Error::invalid("training set is empty"))?;
    let classes = train.num_classes();
    let mut model = Network::new(&shape, &cfg.architecture.layers(classes), cfg.seed)?;
    let mut adam = AdamState::for_network(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_0F_5A_3B1E);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let input_len = model.input_len();
    let opts = BackwardOptions {
        param_grads: true,
        input_grad: false,
        upstream_is_preactivation: false,
    };
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut probs = vec![S::zero(); classes];

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        let mut inputs = Vec::with_capacity(cfg.batch_size * input_len);
        for chunk in order.chunks(cfg.batch_size) {
            inputs.clear();
            for &i in chunk {
                inputs.extend_from_slice(train.images()[i].pixels());
            }
            let n = chunk.len();
            let (logits, trace) = model.forward_batch(&inputs, n).map_err(|e| at_epoch(e, epoch))?;
            let mut upstream = vec![S::zero(); logits.len()];
            let inv_n = S::from_f64_lossy(1.0 / n as f64);
            for (k, &i) in chunk.iter().enumerate() {
                let label = train.labels()[i];
                let row = &logits[k * classes..(k + 1) * classes];
                softmax_into(row, &mut probs);
                loss_sum -= probs[label].to_f64_lossy().max(PROB_FLOOR).ln();
                correct += usize::from(argmax(row) == label);
                for (c, u) in upstream[k * classes..(k + 1) * classes].iter_mut().enumerate() {
                    let target = if c == label { S::one() } else { S::zero() };
                    *u = (probs[c] - target) * inv_n;
                }
            }
            if !loss_sum.is_finite() {
                return Err(Error::numeric(format!("training loss diverged in epoch {epoch}")));
            }
            let (grads, _) = model.backward_batch(&trace, &upstream, opts)?;
            let grads = grads.expect("requested");
            if !grads.is_finite() {
                return Err(Error::numeric(format!("non-finite gradient in epoch {epoch}")));
            }
            adam_step(&mut model, &grads, &mut adam, cfg.learning_rate).map_err(|e| at_epoch(e, epoch))?;
        }
        log.push(EpochRecord {
            epoch,
            mean_loss: loss_sum / train.len() as f64,
            train_accuracy: correct as f64 / train.len() as f64,
        });
    }
    let final_train_accuracy = accuracy(&model, train)?;
    let final_test_accuracy = test.map(|t| accuracy(&model, t)).transpose()?;
    Ok((
        model,
        TrainingLog {
            epochs: log,
            final_train_accuracy,
            final_test_accuracy,
        },
    ))
}

fn at_epoch(e: Error, epoch: usize) -> Error {
    match e {
        Error::Numeric(msg) => Error::numeric(format!("epoch {epoch}: {msg}")),
        other => other,
    }
}

/// Raw logits for one image.
pub fn logits<S: Scalar>(model: &Network<S>, image: &Image<S>) -> Result<Vec<S>> {
    check_shape(model, image)?;
    Ok(model.forward(&image.to_tensor())?.into_data())
}

/// Raw logits for many images, one row per image.
pub fn logits_batch<S: Scalar>(model: &Network<S>, images: &[Image<S>]) -> Result<Vec<Vec<S>>> {
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(INFERENCE_BATCH) {
        for im in chunk {
            check_shape(model, im)?;
        }
        let (flat, _) = model.forward_batch(&flatten(chunk), chunk.len())?;
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite logits"));
        }
        out.extend(flat.chunks(model.num_outputs()).map(<[S]>::to_vec));
    }
    Ok(out)
}

/// `softmax(forward(model, image))`.
pub fn predict<S: Scalar>(model: &Network<S>, image: &Image<S>) -> Result<ProbVector<S>> {
    crate::numerics::softmax(&Tensor::vector(logits(model, image)?)?)
}

pub fn predict_batch<S: Scalar>(model: &Network<S>, images: &[Image<S>]) -> Result<Vec<ProbVector<S>>> {
    logits_batch(model, images)?
        .into_iter()
        .map(|row| crate::numerics::softmax(&Tensor::vector(row)?))
        .collect()
}

pub fn predict_labels<S: Scalar>(model: &Network<S>, images: &[Image<S>]) -> Result<Vec<usize>> {
    Ok(logits_batch(model, images)?.iter().map(|row| argmax(row)).collect())
}

pub fn accuracy<S: Scalar>(model: &Network<S>, set: &LabeledImageSet<S>) -> Result<f64> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let predicted = predict_labels(model, set.images())?;
    let hits = predicted.iter().zip(set.labels()).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / set.len() as f64)
}

/// Gradient of `cross_entropy(predict(model, image), label)` with respect to
/// every pixel, shaped like the image.
pub fn input_gradient<S: Scalar>(model: &Network<S>, image: &Image<S>, label: usize) -> Result<Tensor<S>> {
    check_shape(model, image)?;
    let grads = input_gradients_flat(model, image.pixels(), &[label])?;
    Tensor::new(image.shape().to_vec(), grads)
}

/// Cross-entropy input gradients for a contiguous batch of inputs.
pub(crate) fn input_gradients_flat<S: Scalar>(model: &Network<S>, inputs: &[S], labels: &[usize]) -> Result<Vec<S>> {
    let classes = model.num_outputs();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!("label {bad} out of range for {classes} classes")));
    }
    let (logits, trace) = model.forward_batch(inputs, labels.len())?;
    let mut upstream = vec![S::zero(); logits.len()];
    for (k, &label) in labels.iter().enumerate() {
        let row = &mut upstream[k * classes..(k + 1) * classes];
        softmax_into(&logits[k * classes..(k + 1) * classes], row);
        // Below the probability floor the clamped loss is flat in p.
        if row[label].to_f64_lossy() < PROB_FLOOR {
            row.iter_mut().for_each(|v| *v = S::zero());
        } else {
            row[label] -= S::one();
        }
    }
    let opts = BackwardOptions {
        param_grads: false,
        input_grad: true,
        upstream_is_preactivation: false,
    };
    let (_, grad) = model.backward_batch(&trace, &upstream, opts)?;
    Ok(grad.expect("requested"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_set() -> LabeledImageSet<f32> {
        let images = (0..10)
            .map(|i| {
                let v = if i % 2 == 0 { 0.1 } else { 0.9 };
                Image::filled(1, 6, 6, v).unwrap()
            })
            .collect();
        LabeledImageSet::new(images, (0..10).map(|i| i % 2).collect(), 2).unwrap()
    }

    #[test]
    fn one_epoch_smoke() {
        let cfg = ClassifierConfig {
            architecture: Architecture::Tiny,
            epochs: 1,
            batch_size: 4,
            learning_rate: 1e-3,
            seed: 1,
        };
        let (_, log) = train_classifier(&toy_set(), None, &cfg).unwrap();
        assert!(log.epochs[0].mean_loss.is_finite());
    }

    #[test]
    fn training_is_reproducible_and_learns_toy_task() {
        let cfg = ClassifierConfig {
            architecture: Architecture::Tiny,
            epochs: 30,
            batch_size: 5,
            learning_rate: 1e-2,
            seed: 3,
        };
        let set = toy_set();
        let (a, log) = train_classifier(&set, Some(&set), &cfg).unwrap();
        let (b, _) = train_classifier(&set, None, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(log.final_test_accuracy, Some(1.0));
    }

    #[test]
    fn zero_model_predicts_uniform() {
        let model = Network::<f64>::zeroed(&[1, 4, 4], &Architecture::Tiny.layers(4)).unwrap();
        let im = Image::filled(1, 4, 4, 0.5).unwrap();
        let p = predict(&model, &im).unwrap();
        assert!(p.probs().iter().all(|&v| (v - 0.25).abs() < 1e-12));
        let g = input_gradient(&model, &im, 2).unwrap();
        assert_eq!(g.shape(), &[1, 4, 4]);
        assert!(g.data().iter().all(|&v| v == 0.0));
        assert!(predict(&model, &Image::filled(1, 5, 4, 0.5).unwrap()).is_err());
    }

    #[test]
    fn batch_and_single_agree() {
        let set = toy_set();
        let model = Network::<f32>::new(&[1, 6, 6], &Architecture::Tiny.layers(2), 9).unwrap();
        let batch = predict_batch(&model, set.images()).unwrap();
        for (im, p) in set.images().iter().zip(&batch) {
            assert_eq!(&predict(&model, im).unwrap(), p);
        }
    }
}

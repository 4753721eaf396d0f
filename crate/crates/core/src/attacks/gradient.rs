//! Sign-gradient attacks.

use super::{check_batch, finish_records, AdversarialRecord};
use crate::classifier::input_gradients_flat;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::numerics::Network;
use crate::scalar::Scalar;

fn sign<S: Scalar>(v: S) -> S {
    if v > S::zero() {
        S::one()
    } else if v < S::zero() {
        -S::one()
    } else {
        S::zero()
    }
}

fn flatten<S: Scalar>(images: &[Image<S>]) -> Vec<S> {
    images.iter().flat_map(|im| im.pixels().iter().copied()).collect()
}

fn unflatten<S: Scalar>(flat: Vec<S>, like: &[Image<S>]) -> Result<Vec<Image<S>>> {
    let len = like.first().map_or(0, Image::len);
    like.iter()
        .zip(flat.chunks(len.max(1)))
        .map(|(im, px)| {
            let [c, h, w] = im.shape();
            Image::new(c, h, w, px.to_vec())
        })
        .collect()
}

/// `clip(x + ε sign(∇x J(f(x), y)))` for a batch.
pub fn fgsm_batch<S: Scalar>(
    model: &Network<S>,
    images: &[Image<S>],
    labels: &[usize],
    epsilon: f64,
) -> Result<Vec<AdversarialRecord<S>>> {
    bim_batch(model, images, labels, epsilon, epsilon, 1)
}

pub fn fgsm<S: Scalar>(model: &Network<S>, image: &Image<S>, label: usize, epsilon: f64) -> Result<AdversarialRecord<S>> {
    Ok(fgsm_batch(model, std::slice::from_ref(image), &[label], epsilon)?.remove(0))
}

/// Iterated FGSM; each iterate is clipped to [0,1] and to the L∞ ball of
/// radius ε around the original.
pub fn bim_batch<S: Scalar>(
    model: &Network<S>,
    images: &[Image<S>],
    labels: &[usize],
    epsilon: f64,
    step: f64,
    iterations: usize,
) -> Result<Vec<AdversarialRecord<S>>> {
    check_batch(model, images, labels)?;
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    if !(step >= 0.0 && step.is_finite()) || iterations == 0 {
        return Err(Error::invalid("step must be >= 0 and iterations >= 1"));
    }
    if images.is_empty() {
        return Ok(Vec::new());
    }
    let original = flatten(images);
    let eps = S::from_f64_lossy(epsilon);
    let alpha = S::from_f64_lossy(step);
    let lo: Vec<S> = original.iter().map(|&x| (x - eps).max(S::zero())).collect();
    let hi: Vec<S> = original.iter().map(|&x| (x + eps).min(S::one())).collect();
    let mut x = original.clone();
    for _ in 0..iterations {
        let g = input_gradients_flat(model, &x, labels)?;
        for i in 0..x.len() {
            x[i] = (x[i] + alpha * sign(g[i])).max(lo[i]).min(hi[i]);
        }
    }
    finish_records(model, images, unflatten(x, images)?, labels, None)
}

pub fn bim<S: Scalar>(
    model: &Network<S>,
    image: &Image<S>,
    label: usize,
    epsilon: f64,
    step: f64,
    iterations: usize,
) -> Result<AdversarialRecord<S>> {
    Ok(bim_batch(model, std::slice::from_ref(image), &[label], epsilon, step, iterations)?.remove(0))
}

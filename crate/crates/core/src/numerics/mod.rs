//! Dense tensors, a small layered network with exact backpropagation,
//! softmax/cross-entropy and the Adam optimizer.

pub mod checkpoint;
mod loss;
pub mod network;
mod optim;
mod tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use loss::{cross_entropy, softmax, ProbVector, PROB_FLOOR};
pub(crate) use loss::{argmax, softmax_into};
pub use network::{Activation, BackwardOptions, Gradients, Layer, LayerSpec, Network, Trace};
pub use optim::{adam_step, AdamState};
pub use tensor::Tensor;

use crate::error::Result;
use crate::scalar::Scalar;

pub fn forward<S: Scalar>(model: &Network<S>, input: &Tensor<S>) -> Result<Tensor<S>> {
    model.forward(input)
}

pub fn backward<S: Scalar>(
    model: &Network<S>,
    input: &Tensor<S>,
    upstream: &Tensor<S>,
) -> Result<(Gradients<S>, Tensor<S>)> {
    model.backward(input, upstream)
}

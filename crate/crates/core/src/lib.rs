//! Adversarial image detection from prediction divergence.
//!
//! An image and several transformed copies of it are classified; the
//! Kullback-Leibler divergence between the predictions is the detection
//! score. Scores of nine transformation families are thresholded one at a
//! time or fed jointly to a small trained judge network.

mod binfmt;
pub mod attacks;
pub mod attribution;
pub mod classifier;
pub mod dataset;
pub mod detector;
pub mod error;
pub mod image;
pub mod metrics;
pub mod numerics;
pub mod pipeline;
pub mod scalar;
pub mod seed;
pub mod transforms;

pub use error::{Error, Result};
pub use image::Image;
pub use numerics::{Network, ProbVector, Tensor};
pub use scalar::Scalar;

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Network32 = Network<f32>;
pub type Network64 = Network<f64>;
pub type Image32 = Image<f32>;
pub type Image64 = Image<f64>;

//! The nine image transformation families and their dispatch.
//!
//! Every transform returns pixels clipped to [0,1]. Only additive noise
//! consumes the seed.

mod dct;
mod geometry;
mod pixel;
mod spec;

pub use dct::{dct2, feature_filter, idct2, kept_extent};
pub use geometry::{
    build_affine, resize, scale_roundtrip, scaled_extent, warp, AffineMatrix, Interpolation,
};
pub use pixel::{add_noise, bit_depth_reduce, gaussian_sigma, smooth};
pub use spec::{
    canonical_suite, load_suite, noop_suite, save_suite, suite_from_json, suite_to_json, sweep_specs,
    validate_suite, Family, FlipAxis, NoiseKind, SmoothKind, TransformSpec, MAX_BITS, SUITE_LEN,
};

use crate::error::Result;
use crate::image::Image;
use crate::scalar::Scalar;

/// Applies one spec. Geometric families use bilinear resampling; scale
/// uses [`scale_roundtrip`] so the output keeps the input size.
pub fn transform<S: Scalar>(image: &Image<S>, spec: &TransformSpec, seed: u64) -> Result<Image<S>> {
    spec.validate()?;
    match *spec {
        TransformSpec::AdditiveNoise { noise, strength } => add_noise(image, noise, strength, seed),
        TransformSpec::Smoothing { filter, window } => smooth(image, filter, window),
        TransformSpec::BitDepth { bits } => bit_depth_reduce(image, bits),
        TransformSpec::FeatureFilter { keep_ratio } => feature_filter(image, keep_ratio),
        TransformSpec::Scale { s } => scale_roundtrip(image, s),
        TransformSpec::Translation { .. }
        | TransformSpec::Flip { .. }
        | TransformSpec::Rotation { .. }
        | TransformSpec::Shear { .. } => {
            let m = build_affine(spec, image.height(), image.width())?;
            warp(image, &m, Interpolation::Bilinear)
        }
    }
}

/// Applies every spec of a suite, in order.
pub fn transform_suite<S: Scalar>(image: &Image<S>, suite: &[TransformSpec], seed: u64) -> Result<Vec<Image<S>>> {
    suite.iter().map(|spec| transform(image, spec, seed)).collect()
}

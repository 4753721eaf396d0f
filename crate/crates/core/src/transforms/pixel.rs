//! Per-pixel and neighbourhood transforms: noise, smoothing, bit depth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::spec::{NoiseKind, SmoothKind, MAX_BITS};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

fn map_f64<S: Scalar>(image: &Image<S>, mut f: impl FnMut(f64) -> f64) -> Image<S> {
    image.with_pixels(
        image
            .pixels()
            .iter()
            .map(|&p| S::from_f64_lossy(f(p.to_f64_lossy())))
            .collect(),
    )
}

/// Adds seeded noise and clips to [0,1]. Strength 0 returns the input.
pub fn add_noise<S: Scalar>(image: &Image<S>, kind: NoiseKind, strength: f64, seed: u64) -> Result<Image<S>> {
    if !(strength >= 0.0 && strength.is_finite()) {
        return Err(Error::invalid(format!("noise strength must be finite and >= 0, got {strength}")));
    }
    if strength == 0.0 {
        return Ok(image.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = match kind {
        NoiseKind::Gaussian => {
            let n = Normal::new(0.0, strength).map_err(|e| Error::invalid(e.to_string()))?;
            map_f64(image, |x| x + n.sample(&mut rng))
        }
        NoiseKind::Speckle => {
            let n = Normal::new(0.0, strength).map_err(|e| Error::invalid(e.to_string()))?;
            map_f64(image, |x| x * (1.0 + n.sample(&mut rng)))
        }
        NoiseKind::SaltPepper => {
            if strength > 1.0 {
                return Err(Error::invalid("salt-pepper fraction must lie in [0,1]"));
            }
            map_f64(image, |x| {
                if rng.random::<f64>() < strength {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    x
                }
            })
        }
        NoiseKind::Poisson => {
            let lambda = strength;
            map_f64(image, |x| {
                let mean = x * lambda;
                if mean <= 0.0 {
                    return 0.0;
                }
                // Mean is positive and finite here, so construction cannot fail.
                let d = Poisson::new(mean).expect("positive mean");
                d.sample(&mut rng) / lambda
            })
        }
    };
    Ok(out)
}

/// Sigma for a gaussian kernel of the given window, following the usual
/// `0.3 * ((k - 1) / 2 - 1) + 0.8` rule of thumb.
pub fn gaussian_sigma(window: usize) -> f64 {
    0.3 * ((window as f64 - 1.0) / 2.0 - 1.0) + 0.8
}

fn gaussian_kernel(window: usize) -> Vec<f64> {
    let sigma = gaussian_sigma(window);
    let r = (window / 2) as f64;
    let raw: Vec<f64> = (0..window)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Per-channel sliding-window filter with edge replication.
///
/// Window 1 is accepted and returns the input unchanged.
pub fn smooth<S: Scalar>(image: &Image<S>, kind: SmoothKind, window: usize) -> Result<Image<S>> {
    if window % 2 == 0 {
        return Err(Error::invalid(format!("smoothing window must be odd, got {window}")));
    }
    if window == 1 {
        return Ok(image.clone());
    }
    let (channels, h, w) = image.dims();
    let r = (window / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let kernel = (kind == SmoothKind::Gaussian).then(|| gaussian_kernel(window));
    let mut out = Vec::with_capacity(image.len());
    let mut buf = Vec::with_capacity(window * window);
    for c in 0..channels {
        let plane = image.channel(c);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0f64;
                buf.clear();
                for dy in -r..=r {
                    let sy = clamp(y as isize + dy, h);
                    for dx in -r..=r {
                        let sx = clamp(x as isize + dx, w);
                        let v = plane[sy * w + sx].to_f64_lossy();
                        match &kernel {
                            Some(k) => acc += k[(dy + r) as usize] * k[(dx + r) as usize] * v,
                            None => buf.push(v),
                        }
                    }
                }
                let v = match kind {
                    SmoothKind::Maximum => buf.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    SmoothKind::Minimum => buf.iter().copied().fold(f64::INFINITY, f64::min),
                    SmoothKind::Uniform => buf.iter().sum::<f64>() / buf.len() as f64,
                    SmoothKind::Median => {
                        buf.sort_by(f64::total_cmp);
                        buf[buf.len() / 2]
                    }
                    SmoothKind::Gaussian => acc,
                };
                out.push(S::from_f64_lossy(v));
            }
        }
    }
    Ok(image.with_pixels(out))
}

/// `round(x * (2^i - 1)) / (2^i - 1)` with ties away from zero.
pub fn bit_depth_reduce<S: Scalar>(image: &Image<S>, bits: u32) -> Result<Image<S>> {
    if !(1..=MAX_BITS).contains(&bits) {
        return Err(Error::invalid(format!("bit depth must be in 1..={MAX_BITS}, got {bits}")));
    }
    let levels = ((1u32 << bits) - 1) as f64;
    Ok(map_f64(image, |x| (x * levels).round() / levels))
}

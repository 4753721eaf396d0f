use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

/// `channels x height x width` image, row-major per channel, pixels in [0,1].
#[derive(Clone, Debug, PartialEq)]
pub struct Image<S> {
    channels: usize,
    height: usize,
    width: usize,
    pixels: Vec<S>,
}

impl<S: Scalar> Image<S> {
    pub fn new(channels: usize, height: usize, width: usize, pixels: Vec<S>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::invalid(format!("image dimensions {channels}x{height}x{width} must be positive")));
        }
        if pixels.len() != channels * height * width {
            return Err(Error::invalid(format!(
                "{channels}x{height}x{width} image needs {} pixels, got {}",
                channels * height * width,
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("image contains non-finite pixels"));
        }
        Ok(Image {
            channels,
            height,
            width,
            pixels,
        })
    }

    /// Builds an image, clipping every pixel into [0,1].
    pub fn clipped(channels: usize, height: usize, width: usize, mut pixels: Vec<S>) -> Result<Self> {
        for p in pixels.iter_mut() {
            *p = clip01(*p);
        }
        Image::new(channels, height, width, pixels)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: S) -> Result<Self> {
        Image::new(channels, height, width, vec![value; channels * height * width])
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[S] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<S> {
        self.pixels
    }

    pub fn channel(&self, c: usize) -> &[S] {
        let n = self.height * self.width;
        &self.pixels[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> S {
        self.pixels[(c * self.height + y) * self.width + x]
    }

    pub fn same_shape(&self, other: &Image<S>) -> bool {
        self.shape() == other.shape()
    }

    pub fn to_tensor(&self) -> Tensor<S> {
        Tensor::new(self.shape().to_vec(), self.pixels.clone()).expect("image dimensions are positive")
    }

    pub fn in_unit_range(&self) -> bool {
        self.pixels.iter().all(|&p| p >= S::zero() && p <= S::one())
    }

    pub fn cast<T: Scalar>(&self) -> Image<T> {
        Image {
            channels: self.channels,
            height: self.height,
            width: self.width,
            pixels: self.pixels.iter().map(|p| T::from_f64_lossy(p.to_f64_lossy())).collect(),
        }
    }

    /// Same-shaped image over new pixel data, clipped to [0,1].
    pub(crate) fn with_pixels(&self, pixels: Vec<S>) -> Image<S> {
        debug_assert_eq!(pixels.len(), self.pixels.len());
        Image {
            channels: self.channels,
            height: self.height,
            width: self.width,
            pixels: pixels.into_iter().map(clip01).collect(),
        }
    }

    pub fn l2_distance(&self, other: &Image<S>) -> f64 {
        self.pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| {
                let d = a.to_f64_lossy() - b.to_f64_lossy();
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn linf_distance(&self, other: &Image<S>) -> f64 {
        self.pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (a.to_f64_lossy() - b.to_f64_lossy()).abs())
            .fold(0.0, f64::max)
    }
}

impl<S> Image<S> {
    pub(crate) fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }
}

#[inline]
pub(crate) fn clip01<S: Scalar>(v: S) -> S {
    v.max(S::zero()).min(S::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_validates() {
        assert!(Image::<f32>::new(1, 2, 2, vec![0.0; 4]).is_ok());
        assert!(Image::<f32>::new(1, 2, 2, vec![0.0; 3]).is_err());
        assert!(Image::<f32>::new(0, 2, 2, vec![]).is_err());
        let c = Image::<f32>::clipped(1, 1, 2, vec![-0.5, 1.5]).unwrap();
        assert_eq!(c.pixels(), &[0.0, 1.0]);
    }

    #[test]
    fn distances() {
        let a = Image::<f64>::new(1, 1, 2, vec![0.0, 0.0]).unwrap();
        let b = Image::<f64>::new(1, 1, 2, vec![0.3, 0.4]).unwrap();
        assert!((a.l2_distance(&b) - 0.5).abs() < 1e-12);
        assert!((a.linf_distance(&b) - 0.4).abs() < 1e-12);
    }
}

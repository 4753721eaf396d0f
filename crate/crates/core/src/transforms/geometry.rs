//! Affine warps and rescaling.
//!
//! Coordinates are pixel indices with `x` the column and `y` the row
//! (pointing down). Flip, rotation, shear and scale act about the image
//! center `((W-1)/2, (H-1)/2)`.

use serde::{Deserialize, Serialize};

use super::spec::{FlipAxis, TransformSpec};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

/// `v' = linear * v + offset` mapping source to destination coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMatrix {
    pub linear: [[f64; 2]; 2],
    pub offset: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    Bilinear,
    Nearest,
}

impl AffineMatrix {
    pub const IDENTITY: AffineMatrix = AffineMatrix {
        linear: [[1.0, 0.0], [0.0, 1.0]],
        offset: [0.0, 0.0],
    };

    pub fn translation(dx: f64, dy: f64) -> Self {
        AffineMatrix {
            offset: [dx, dy],
            ..Self::IDENTITY
        }
    }

    /// Linear map applied about `center`: `v' = L (v - c) + c`.
    pub fn about(linear: [[f64; 2]; 2], center: [f64; 2]) -> Self {
        let [cx, cy] = center;
        let ox = cx - (linear[0][0] * cx + linear[0][1] * cy);
        let oy = cy - (linear[1][0] * cx + linear[1][1] * cy);
        AffineMatrix {
            linear,
            offset: [ox, oy],
        }
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let l = &self.linear;
        (
            l[0][0] * x + l[0][1] * y + self.offset[0],
            l[1][0] * x + l[1][1] * y + self.offset[1],
        )
    }

    pub fn determinant(&self) -> f64 {
        self.linear[0][0] * self.linear[1][1] - self.linear[0][1] * self.linear[1][0]
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().flatten().chain(&self.offset).all(|v| v.is_finite())
    }

    pub fn inverse(&self) -> Result<AffineMatrix> {
        let det = self.determinant();
        if !self.is_finite() || det.abs() < 1e-12 {
            return Err(Error::invalid("affine matrix is singular or not finite"));
        }
        let [[a, b], [c, d]] = self.linear;
        let linear = [[d / det, -b / det], [-c / det, a / det]];
        let [tx, ty] = self.offset;
        let offset = [
            -(linear[0][0] * tx + linear[0][1] * ty),
            -(linear[1][0] * tx + linear[1][1] * ty),
        ];
        Ok(AffineMatrix { linear, offset })
    }
}

fn center(height: usize, width: usize) -> [f64; 2] {
    [(width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0]
}

/// Matrix realizing a geometric spec on an image of the given size.
pub fn build_affine(spec: &TransformSpec, height: usize, width: usize) -> Result<AffineMatrix> {
    spec.validate()?;
    let c = center(height, width);
    let m = match *spec {
        TransformSpec::Translation { offset: [a, b] } => AffineMatrix::translation(a as f64, b as f64),
        TransformSpec::Flip { axis } => {
            let (sx, sy) = match axis {
                FlipAxis::None => (1.0, 1.0),
                FlipAxis::Horizontal => (-1.0, 1.0),
                FlipAxis::Vertical => (1.0, -1.0),
                FlipAxis::Both => (-1.0, -1.0),
            };
            AffineMatrix::about([[sx, 0.0], [0.0, sy]], c)
        }
        TransformSpec::Rotation { degrees } => {
            if degrees == 0.0 {
                return Ok(AffineMatrix::IDENTITY);
            }
            let (s, co) = degrees.to_radians().sin_cos();
            AffineMatrix::about([[co, -s], [s, co]], c)
        }
        TransformSpec::Shear { a } => AffineMatrix::about([[1.0, a], [0.0, 1.0]], c),
        TransformSpec::Scale { s } => AffineMatrix::about([[s, 0.0], [0.0, s]], c),
        _ => {
            return Err(Error::invalid(format!(
                "{} is not a geometric transform",
                spec.family().column()
            )))
        }
    };
    Ok(m)
}

/// Zero-filled sample of a plane at integer coordinates.
#[inline]
fn tap(plane: &[f64], h: usize, w: usize, x: isize, y: isize) -> f64 {
    if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
        0.0
    } else {
        plane[y as usize * w + x as usize]
    }
}

fn bilinear(plane: &[f64], h: usize, w: usize, sx: f64, sy: f64) -> f64 {
    let x0 = sx.floor();
    let y0 = sy.floor();
    let fx = sx - x0;
    let fy = sy - y0;
    let (xi, yi) = (x0 as isize, y0 as isize);
    let mut v = (1.0 - fx) * (1.0 - fy) * tap(plane, h, w, xi, yi);
    // Skipping zero-weight taps keeps integer-aligned samples exact.
    if fx != 0.0 {
        v += fx * (1.0 - fy) * tap(plane, h, w, xi + 1, yi);
    }
    if fy != 0.0 {
        v += (1.0 - fx) * fy * tap(plane, h, w, xi, yi + 1);
        if fx != 0.0 {
            v += fx * fy * tap(plane, h, w, xi + 1, yi + 1);
        }
    }
    v
}

/// Inverse-mapping resample; samples falling outside the frame read 0.
pub fn warp<S: Scalar>(image: &Image<S>, matrix: &AffineMatrix, interp: Interpolation) -> Result<Image<S>> {
    let inv = matrix.inverse()?;
    let (channels, h, w) = image.dims();
    let mut out = Vec::with_capacity(image.len());
    for c in 0..channels {
        let plane: Vec<f64> = image.channel(c).iter().map(|p| p.to_f64_lossy()).collect();
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = inv.apply(x as f64, y as f64);
                let v = match interp {
                    Interpolation::Bilinear => bilinear(&plane, h, w, sx, sy),
                    Interpolation::Nearest => tap(&plane, h, w, sx.round() as isize, sy.round() as isize),
                };
                out.push(S::from_f64_lossy(v));
            }
        }
    }
    Ok(image.with_pixels(out))
}

/// Bilinear resize with half-pixel centers and edge clamping.
pub fn resize<S: Scalar>(image: &Image<S>, out_h: usize, out_w: usize) -> Result<Image<S>> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid("resize target must be nonempty"));
    }
    let (channels, h, w) = image.dims();
    let axis = |o: usize, out: usize, inp: usize| -> (usize, usize, f64) {
        let s = ((o as f64 + 0.5) * inp as f64 / out as f64 - 0.5).clamp(0.0, inp as f64 - 1.0);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(inp - 1);
        (i0, i1, s - i0 as f64)
    };
    let xs: Vec<_> = (0..out_w).map(|x| axis(x, out_w, w)).collect();
    let mut pixels = Vec::with_capacity(channels * out_h * out_w);
    for c in 0..channels {
        let plane = image.channel(c);
        for y in 0..out_h {
            let (y0, y1, fy) = axis(y, out_h, h);
            for &(x0, x1, fx) in &xs {
                let p = |yy: usize, xx: usize| plane[yy * w + xx].to_f64_lossy();
                let top = p(y0, x0) + fx * (p(y0, x1) - p(y0, x0));
                let bot = p(y1, x0) + fx * (p(y1, x1) - p(y1, x0));
                pixels.push(S::from_f64_lossy(top + fy * (bot - top)));
            }
        }
    }
    Image::clipped(channels, out_h, out_w, pixels)
}

/// Side length after scaling by `s`, never below one pixel.
pub fn scaled_extent(n: usize, s: f64) -> usize {
    ((n as f64 * s).round() as usize).max(1)
}

/// Rescale by `s` and return to the original size: shrink then enlarge for
/// `s < 1`, enlarge then center-crop for `s > 1`. `s = 1` is the identity.
pub fn scale_roundtrip<S: Scalar>(image: &Image<S>, s: f64) -> Result<Image<S>> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("scale must be finite and > 0, got {s}")));
    }
    let (channels, h, w) = image.dims();
    let (mh, mw) = (scaled_extent(h, s), scaled_extent(w, s));
    if (mh, mw) == (h, w) {
        return Ok(image.clone());
    }
    let mid = resize(image, mh, mw)?;
    if s < 1.0 {
        return resize(&mid, h, w);
    }
    let (oy, ox) = ((mh - h) / 2, (mw - w) / 2);
    let mut pixels = Vec::with_capacity(image.len());
    for c in 0..channels {
        let plane = mid.channel(c);
        for y in 0..h {
            pixels.extend_from_slice(&plane[(y + oy) * mw + ox..(y + oy) * mw + ox + w]);
        }
    }
    Image::new(channels, h, w, pixels)
}

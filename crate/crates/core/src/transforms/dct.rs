//! Orthonormal type-II 2-D DCT and the frequency-domain low-pass filter.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

/// Row-major `n x n` orthonormal DCT-II basis: `B[k][i] = a_k cos(pi (2i+1) k / 2n)`.
fn basis(n: usize) -> Vec<f64> {
    let mut b = vec![0.0; n * n];
    let nf = n as f64;
    for k in 0..n {
        let a = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        for i in 0..n {
            b[k * n + i] = a * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos();
        }
    }
    b
}

/// `out = L * x * R^T` for `L: m x m`, `x: m x n`, `R: n x n`, all row-major.
fn sandwich(l: &[f64], x: &[f64], r: &[f64], m: usize, n: usize, transpose: bool) -> Vec<f64> {
    // With `transpose` the basis matrices act as their transposes (inverse DCT).
    let lv = |a: usize, b: usize| if transpose { l[b * m + a] } else { l[a * m + b] };
    let rv = |a: usize, b: usize| if transpose { r[b * n + a] } else { r[a * n + b] };
    let mut tmp = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            tmp[i * n + j] = (0..m).map(|k| lv(i, k) * x[k * n + j]).sum();
        }
    }
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[i * n + j] = (0..n).map(|k| tmp[i * n + k] * rv(j, k)).sum();
        }
    }
    out
}

fn check(data_len: usize, rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("DCT needs a nonempty channel"));
    }
    if data_len != rows * cols {
        return Err(Error::invalid(format!("{data_len} values for a {rows}x{cols} channel")));
    }
    Ok(())
}

/// Forward transform of a row-major `rows x cols` channel.
pub fn dct2(channel: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    check(channel.len(), rows, cols)?;
    Ok(sandwich(&basis(rows), channel, &basis(cols), rows, cols, false))
}

/// Inverse of [`dct2`].
pub fn idct2(coeffs: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    check(coeffs.len(), rows, cols)?;
    Ok(sandwich(&basis(rows), coeffs, &basis(cols), rows, cols, true))
}

/// Number of low-frequency indices kept along an axis of length `n`.
pub fn kept_extent(ratio: f64, n: usize) -> usize {
    // The small slack stops products like 0.7 * 10 = 7.000000000000001 from
    // rounding up to an extra coefficient.
    ((ratio * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Keeps the top-left `ceil(r H) x ceil(r W)` DCT block of each channel.
pub fn feature_filter<S: Scalar>(image: &Image<S>, keep_ratio: f64) -> Result<Image<S>> {
    if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
        return Err(Error::invalid(format!("keep ratio must be in (0,1], got {keep_ratio}")));
    }
    let (channels, h, w) = image.dims();
    let kh = kept_extent(keep_ratio, h);
    let kw = kept_extent(keep_ratio, w);
    let (bh, bw) = (basis(h), basis(w));
    let mut out = Vec::with_capacity(image.len());
    for c in 0..channels {
        let plane: Vec<f64> = image.channel(c).iter().map(|p| p.to_f64_lossy()).collect();
        let mut coeffs = sandwich(&bh, &plane, &bw, h, w, false);
        for y in 0..h {
            for x in 0..w {
                if y >= kh || x >= kw {
                    coeffs[y * w + x] = 0.0;
                }
            }
        }
        let back = sandwich(&bh, &coeffs, &bw, h, w, true);
        out.extend(back.into_iter().map(S::from_f64_lossy));
    }
    Ok(image.with_pixels(out))
}

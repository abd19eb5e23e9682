use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::rng::{standard_normal, RngStream};

const MNIST_SIDE: usize = 28;
const BLOCK: usize = 4;

/// Mean over non-overlapping `factor x factor` blocks of a row-major image.
pub fn block_mean(pixels: &[f64], height: usize, width: usize, factor: usize) -> Result<Vec<f64>, DataError> {
    if factor == 0 || !height.is_multiple_of(factor) || !width.is_multiple_of(factor) || pixels.len() != height * width {
        return Err(DataError::Shape {
            expected: (height, width),
            actual: (pixels.len() / width.max(1), width),
        });
    }
    let (h, w) = (height / factor, width / factor);
    let area = (factor * factor) as f64;
    let mut out = vec![0.0; h * w];
    for (bi, cell) in out.iter_mut().enumerate() {
        let (r0, c0) = ((bi / w) * factor, (bi % w) * factor);
        let mut s = 0.0;
        for r in r0..r0 + factor {
            s += pixels[r * width + c0..r * width + c0 + factor].iter().sum::<f64>();
        }
        *cell = s / area;
    }
    Ok(out)
}

/// Nearest-neighbour upsampling: every pixel becomes a `factor x factor` block.
pub fn upsample(pixels: &[f64], height: usize, width: usize, factor: usize) -> Vec<f64> {
    let out_w = width * factor;
    let mut out = vec![0.0; height * factor * out_w];
    for (i, v) in out.iter_mut().enumerate() {
        let (r, c) = (i / out_w / factor, (i % out_w) / factor);
        *v = pixels[r * width + c];
    }
    out
}

/// 28x28 grayscale bytes to a 7x7 image of 4x4 block means scaled to `[0, 1]`.
pub fn downscale(img: &[u8]) -> Result<Vec<f64>, DataError> {
    if img.len() != MNIST_SIDE * MNIST_SIDE {
        return Err(DataError::Shape {
            expected: (MNIST_SIDE, MNIST_SIDE),
            actual: (img.len() / MNIST_SIDE, MNIST_SIDE),
        });
    }
    let px: Vec<f64> = img.iter().map(|&p| f64::from(p)).collect();
    Ok(block_mean(&px, MNIST_SIDE, MNIST_SIDE, BLOCK)?
        .into_iter()
        .map(|v| v / 255.0)
        .collect())
}

/// Adds i.i.d. `N(0, sigma^2)` noise to every component, without clipping.
pub fn pollute(features: &[f64], sigma: f64, rng: &RngStream) -> Result<Vec<f64>, DataError> {
    let mut g = rng.generator();
    pollute_with(&mut g, features, sigma)
}

pub(crate) fn pollute_with<R: Rng + ?Sized>(g: &mut R, features: &[f64], sigma: f64) -> Result<Vec<f64>, DataError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(DataError::Sigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(features.to_vec());
    }
    Ok(features.iter().map(|&v| v + sigma * standard_normal(g)).collect())
}

/// Per-column affine standardization fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Column means and standard deviations of `rows`; constant columns
    /// keep scale 1.
    pub fn fit<'a, I>(rows: I) -> Standardizer
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let width = rows.first().map_or(0, |r| r.len());
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; width];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for r in &rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }
}

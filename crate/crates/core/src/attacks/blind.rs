//! Model-free features: a coarse 4x4 thumbnail plus global statistics.

use crate::error::{Error, Result};

pub const BLIND_FEATURES: usize = 19;

/// 16 block means over a 4x4 partition, then the image mean, the population
/// variance and the mean squared forward difference (both axes pooled).
pub fn blind_features(pixels: &[f64], height: usize, width: usize) -> Result<Vec<f64>> {
    if height < 4 || width < 4 || pixels.len() != height * width {
        return Err(Error::contract(format!(
            "blind features need at least a 4x4 image, got {height}x{width} with {} values",
            pixels.len()
        )));
    }
    let mut out = Vec::with_capacity(BLIND_FEATURES);
    for bi in 0..4 {
        let (r0, r1) = (bi * height / 4, (bi + 1) * height / 4);
        for bj in 0..4 {
            let (c0, c1) = (bj * width / 4, (bj + 1) * width / 4);
            let mut sum = 0.0;
            for r in r0..r1 {
                sum += pixels[r * width + c0..r * width + c1].iter().sum::<f64>();
            }
            out.push(sum / ((r1 - r0) * (c1 - c0)) as f64);
        }
    }
    let n = pixels.len() as f64;
    let mean = pixels.iter().sum::<f64>() / n;
    let var = pixels.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
    let mut energy = 0.0;
    let mut count = 0usize;
    for r in 0..height {
        for c in 0..width {
            let v = pixels[r * width + c];
            if c + 1 < width {
                energy += (pixels[r * width + c + 1] - v).powi(2);
                count += 1;
            }
            if r + 1 < height {
                energy += (pixels[(r + 1) * width + c] - v).powi(2);
                count += 1;
            }
        }
    }
    out.extend([mean, var, energy / count as f64]);
    Ok(out)
}

//! Seeded synthetic image families with an intensity shift knob.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const GAUSSIAN_FIELD: &str = "gaussian-field";
pub const BLOBS: &str = "blobs";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
}

impl ImageShape {
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

impl Default for ImageShape {
    fn default() -> Self {
        Self {
            height: 8,
            width: 8,
        }
    }
}

/// A generator family plus parameter overrides and a shift offset.
///
/// `shift_delta` is added to the family's background `intensity`, so a spec
/// with `shift_delta = 0` is the same distribution as its base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub shift_delta: f64,
}

impl DistributionSpec {
    pub fn new(family: &str) -> Self {
        Self {
            family: family.to_string(),
            params: BTreeMap::new(),
            shift_delta: 0.0,
        }
    }

    pub fn shifted(mut self, delta: f64) -> Self {
        self.shift_delta = delta;
        self
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// Short human-readable distribution id, e.g. `gaussian-field+0.5`.
    pub fn id(&self) -> String {
        if self.shift_delta == 0.0 {
            self.family.clone()
        } else {
            format!("{}{:+}", self.family, self.shift_delta)
        }
    }

    fn param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    pub(crate) fn sampler(&self) -> Result<Sampler> {
        if !(self.shift_delta.is_finite() && self.shift_delta >= 0.0) {
            return Err(Error::config("shift_delta must be finite and non-negative"));
        }
        let known: &[&str] = match self.family.as_str() {
            GAUSSIAN_FIELD => &["length_scale", "amplitude", "intensity"],
            BLOBS => &["min_blobs", "max_blobs", "min_radius", "max_radius", "amplitude", "intensity"],
            other => return Err(Error::config(format!("unknown generator family '{other}'"))),
        };
        if let Some(k) = self.params.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::config(format!("unknown parameter '{k}' for family '{}'", self.family)));
        }
        let sampler = match self.family.as_str() {
            GAUSSIAN_FIELD => Sampler::Field {
                length_scale: self.param("length_scale", 1.5),
                amplitude: self.param("amplitude", 0.35),
                intensity: self.param("intensity", -0.1) + self.shift_delta,
            },
            _ => {
                let min_blobs = self.param("min_blobs", 1.0);
                let max_blobs = self.param("max_blobs", 4.0);
                let min_radius = self.param("min_radius", 1.0);
                let max_radius = self.param("max_radius", 2.5);
                if !(min_blobs >= 0.0 && min_blobs <= max_blobs && min_radius > 0.0 && min_radius <= max_radius) {
                    return Err(Error::config("blob count/radius ranges are inconsistent"));
                }
                Sampler::Blobs {
                    min_blobs: min_blobs as usize,
                    max_blobs: max_blobs as usize,
                    min_radius,
                    max_radius,
                    amplitude: self.param("amplitude", 0.8),
                    intensity: self.param("intensity", -0.3) + self.shift_delta,
                }
            }
        };
        if let Sampler::Field { length_scale, .. } = sampler {
            if length_scale.is_nan() || length_scale <= 0.0 {
                return Err(Error::config("length_scale must be positive"));
            }
        }
        Ok(sampler)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Sampler {
    Field {
        length_scale: f64,
        amplitude: f64,
        intensity: f64,
    },
    Blobs {
        min_blobs: usize,
        max_blobs: usize,
        min_radius: f64,
        max_radius: f64,
        amplitude: f64,
        intensity: f64,
    },
}

/// One synthetic image. Pixels are row-major, clamped to [-1, 1] and
/// f32-representable.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSample {
    pub id: u64,
    pub pixels: Vec<f64>,
    pub source: String,
}

impl AsRef<[f64]> for ImageSample {
    fn as_ref(&self) -> &[f64] {
        &self.pixels
    }
}

/// Periodic Gaussian kernel over circular offsets of an axis of length `n`.
fn circular_kernel(n: usize, sigma: f64) -> Vec<f64> {
    (0..n)
        .map(|d| {
            let d = d.min(n - d) as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}

impl Sampler {
    pub(crate) fn draw(&self, shape: ImageShape, rng: &mut rng::Rng) -> Vec<f64> {
        let (h, w) = (shape.height, shape.width);
        let raw: Vec<f64> = match *self {
            Sampler::Field {
                length_scale,
                amplitude,
                intensity,
            } => {
                let noise = rng::normal_vec(rng, h * w);
                let kr = circular_kernel(h, length_scale);
                let kc = circular_kernel(w, length_scale);
                // unit marginal variance after smoothing
                let norm = (kr.iter().map(|k| k * k).sum::<f64>() * kc.iter().map(|k| k * k).sum::<f64>()).sqrt();
                let mut out = vec![0.0; h * w];
                for i in 0..h {
                    for j in 0..w {
                        let mut acc = 0.0;
                        for a in 0..h {
                            let kra = kr[(i + h - a) % h];
                            for b in 0..w {
                                acc += kra * kc[(j + w - b) % w] * noise[a * w + b];
                            }
                        }
                        out[i * w + j] = intensity + amplitude * acc / norm;
                    }
                }
                out
            }
            Sampler::Blobs {
                min_blobs,
                max_blobs,
                min_radius,
                max_radius,
                amplitude,
                intensity,
            } => {
                let count = rng.random_range(min_blobs..=max_blobs);
                let mut out = vec![intensity; h * w];
                for _ in 0..count {
                    let cy = rng.random::<f64>() * h as f64;
                    let cx = rng.random::<f64>() * w as f64;
                    let r = min_radius + (max_radius - min_radius) * rng.random::<f64>();
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    let a = sign * amplitude * (0.5 + 0.5 * rng.random::<f64>());
                    for i in 0..h {
                        for j in 0..w {
                            let dy = i as f64 + 0.5 - cy;
                            let dx = j as f64 + 0.5 - cx;
                            out[i * w + j] += a * (-(dy * dy + dx * dx) / (2.0 * r * r)).exp();
                        }
                    }
                }
                out
            }
        };
        raw.into_iter()
            .map(|v| (v.clamp(-1.0, 1.0) as f32) as f64)
            .collect()
    }
}

/// `n` samples with ids `0..n`.
pub fn generate_dataset(
    spec: &DistributionSpec,
    shape: ImageShape,
    n: usize,
    seed: u64,
) -> Result<Vec<ImageSample>> {
    if n == 0 {
        return Err(Error::config("dataset size must be at least 1"));
    }
    generate_with_ids(spec, shape, 0..n as u64, seed)
}

/// Samples for explicit ids. Each image is drawn from its own stream keyed by
/// `(seed, id)`, so the output does not depend on generation order.
pub fn generate_with_ids(
    spec: &DistributionSpec,
    shape: ImageShape,
    ids: impl IntoIterator<Item = u64>,
    seed: u64,
) -> Result<Vec<ImageSample>> {
    if shape.pixels() == 0 {
        return Err(Error::config("image shape must be non-empty"));
    }
    let sampler = spec.sampler()?;
    let source = spec.id();
    Ok(ids
        .into_iter()
        .map(|id| {
            let mut rng = rng::stream(seed, id);
            ImageSample {
                id,
                pixels: sampler.draw(shape, &mut rng),
                source: source.clone(),
            }
        })
        .collect())
}

/// Mean pixel value of an image.
pub fn mean_pixel(pixels: &[f64]) -> f64 {
    pixels.iter().sum::<f64>() / pixels.len() as f64
}

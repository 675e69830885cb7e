//! Gradient-norm features for the classifier attacks.

use super::config::{AttackConfig, Method};
use super::probe::{Probe, QueryCount};
use super::sample_stream;
use crate::diffusion::{noised, LatentState, ModelCheckpoint, ParamGrads};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct AttackFeatures {
    pub values: Vec<f64>,
    pub queries: QueryCount,
}

fn check(model: &ModelCheckpoint, x0: &LatentState, cfg: &AttackConfig) -> Result<()> {
    if !matches!(cfg.method, Method::Gsa1 | Method::Gsa2) {
        return Err(Error::config(format!("config is for {}, not a GSA variant", cfg.method)));
    }
    cfg.validate(model.schedule.steps())?;
    if x0.len() != model.net.pixels {
        return Err(Error::contract("image size does not match the model"));
    }
    Ok(())
}

/// The per-timestep noise draws for one image, keyed by `(seed, sample_id)`.
pub fn gsa_noises(cfg: &AttackConfig, sample_id: u64, pixels: usize) -> Vec<Vec<f64>> {
    let mut rng = sample_stream(cfg.seed, sample_id);
    cfg.grid.iter().map(|_| rng::normal_vec(&mut rng, pixels)).collect()
}

fn check_noises(noises: &[Vec<f64>], x0: &LatentState, cfg: &AttackConfig) -> Result<()> {
    if noises.len() != cfg.grid.len() || noises.iter().any(|n| n.len() != x0.len()) {
        return Err(Error::contract("need one noise grid per timestep, shaped like the image"));
    }
    Ok(())
}

/// Gradient of the grid-averaged loss, from a single backward pass.
pub fn gsa1_gradient(
    model: &ModelCheckpoint,
    x0: &LatentState,
    sample_id: u64,
    cfg: &AttackConfig,
) -> Result<(ParamGrads, QueryCount)> {
    gsa1_gradient_with_noises(model, x0, &gsa_noises(cfg, sample_id, x0.len()), cfg)
}

/// As [`gsa1_gradient`] with caller-supplied noise per grid timestep.
pub fn gsa1_gradient_with_noises(
    model: &ModelCheckpoint,
    x0: &LatentState,
    noises: &[Vec<f64>],
    cfg: &AttackConfig,
) -> Result<(ParamGrads, QueryCount)> {
    check(model, x0, cfg)?;
    check_noises(noises, x0, cfg)?;
    let probe = Probe::new(model);
    let weight = 1.0 / cfg.grid.len() as f64;
    let parts: Vec<_> = cfg
        .grid
        .iter()
        .zip(noises)
        .map(|(&t, eps)| {
            let t = t.max(1);
            let cache = probe.forward_cached(&noised(&x0.values, eps, probe.alpha_bar(t)), t);
            let d_out = cache.output.iter().zip(eps).map(|(p, e)| 2.0 * weight * (p - e)).collect();
            (cache, d_out)
        })
        .collect();
    let grads = probe.backward(&parts);
    Ok((grads, probe.count()))
}

/// One loss gradient per grid timestep, each from its own backward pass.
pub fn gsa2_gradients(
    model: &ModelCheckpoint,
    x0: &LatentState,
    sample_id: u64,
    cfg: &AttackConfig,
) -> Result<(Vec<ParamGrads>, QueryCount)> {
    gsa2_gradients_with_noises(model, x0, &gsa_noises(cfg, sample_id, x0.len()), cfg)
}

/// As [`gsa2_gradients`] with caller-supplied noise per grid timestep.
pub fn gsa2_gradients_with_noises(
    model: &ModelCheckpoint,
    x0: &LatentState,
    noises: &[Vec<f64>],
    cfg: &AttackConfig,
) -> Result<(Vec<ParamGrads>, QueryCount)> {
    check(model, x0, cfg)?;
    check_noises(noises, x0, cfg)?;
    let probe = Probe::new(model);
    let grads = cfg
        .grid
        .iter()
        .zip(noises)
        .map(|(&t, eps)| {
            let t = t.max(1);
            let cache = probe.forward_cached(&noised(&x0.values, eps, probe.alpha_bar(t)), t);
            let d_out = cache.output.iter().zip(eps).map(|(p, e)| 2.0 * (p - e)).collect();
            probe.backward(&[(cache, d_out)])
        })
        .collect();
    Ok((grads, probe.count()))
}

/// Per-layer L2 norms of the averaged-loss gradient.
pub fn gsa1_features(
    model: &ModelCheckpoint,
    x0: &LatentState,
    sample_id: u64,
    cfg: &AttackConfig,
) -> Result<AttackFeatures> {
    let (grads, queries) = gsa1_gradient(model, x0, sample_id, cfg)?;
    Ok(AttackFeatures {
        values: grads.layer_norms(),
        queries,
    })
}

/// Per-layer L2 norms for every timestep, timestep-major.
pub fn gsa2_features(
    model: &ModelCheckpoint,
    x0: &LatentState,
    sample_id: u64,
    cfg: &AttackConfig,
) -> Result<AttackFeatures> {
    let (grads, queries) = gsa2_gradients(model, x0, sample_id, cfg)?;
    Ok(AttackFeatures {
        values: grads.iter().flat_map(ParamGrads::layer_norms).collect(),
        queries,
    })
}

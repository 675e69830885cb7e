use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::net::{DenoiserNet, ParamGrads};
use super::process::accumulate_loss_grad;
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub optimizer: Optimizer,
    #[serde(default)]
    pub lr_schedule: LrSchedule,
    /// Independent `(t, eps)` draws averaged per sample visit.
    #[serde(default = "one")]
    pub noise_draws: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half-cosine decay from the base rate to zero over all updates.
    Cosine,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Plain gradient descent with a fixed step.
    #[default]
    Sgd,
    /// Adam with the usual moment decays (0.9, 0.999).
    Adam,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 1,
            optimizer: Optimizer::Sgd,
            lr_schedule: LrSchedule::Constant,
            noise_draws: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub train_set_size: usize,
    pub seed: u64,
    pub passes_per_datapoint: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub net: DenoiserNet,
    pub schedule: NoiseSchedule,
    pub meta: TrainingMeta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based epoch index.
    pub epoch: usize,
    pub mean_loss: f64,
    pub updates: usize,
}

/// Mini-batch gradient descent on the noise-matching loss.
pub fn train<S: AsRef<[f64]>>(
    net: DenoiserNet,
    train_set: &[S],
    config: &TrainConfig,
    schedule: &NoiseSchedule,
) -> Result<ModelCheckpoint> {
    train_with_observer(net, train_set, config, schedule, |_, _| {})
}

/// As [`train`], calling `observer` after every epoch with the current weights.
pub fn train_with_observer<S, F>(
    mut net: DenoiserNet,
    train_set: &[S],
    config: &TrainConfig,
    schedule: &NoiseSchedule,
    mut observer: F,
) -> Result<ModelCheckpoint>
where
    S: AsRef<[f64]>,
    F: FnMut(&EpochStats, &DenoiserNet),
{
    if train_set.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    if config.epochs == 0 {
        return Err(Error::config("epochs must be at least 1"));
    }
    if config.noise_draws == 0 {
        return Err(Error::config("noise_draws must be at least 1"));
    }
    if config.batch_size == 0 {
        return Err(Error::config("batch size must be at least 1"));
    }
    if !(config.learning_rate.is_finite() && config.learning_rate > 0.0) {
        return Err(Error::config("learning rate must be positive"));
    }
    net.validate()?;
    if let Some(bad) = train_set.iter().position(|s| s.as_ref().len() != net.pixels) {
        return Err(Error::contract(format!(
            "training sample {bad} has {} pixels, network expects {}",
            train_set[bad].as_ref().len(),
            net.pixels
        )));
    }

    let steps = schedule.steps();
    let mut rng = rng::stream(config.seed, rng::TAG_TRAIN);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut grads = ParamGrads::zeros_like(&net);
    let mut step = 0usize;
    let total_updates = config.epochs * train_set.len().div_ceil(config.batch_size);
    let mut adam = (config.optimizer == Optimizer::Adam).then(|| AdamState::new(net.param_count()));

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut updates = 0;
        for batch in order.chunks(config.batch_size) {
            grads.scale(0.0);
            let weight = 1.0 / (batch.len() * config.noise_draws) as f64;
            let mut batch_loss = 0.0;
            for &i in batch.iter().flat_map(|i| std::iter::repeat_n(i, config.noise_draws)) {
                let t = rng.random_range(1..=steps);
                let eps = rng::normal_vec(&mut rng, net.pixels);
                batch_loss += weight * batch.len() as f64 * accumulate_loss_grad(
                    &net,
                    train_set[i].as_ref(),
                    t,
                    &eps,
                    schedule,
                    weight,
                    &mut grads,
                );
            }
            if !batch_loss.is_finite() {
                return Err(Error::Divergence {
                    step,
                    loss: batch_loss,
                });
            }
            let lr = match config.lr_schedule {
                LrSchedule::Constant => config.learning_rate,
                LrSchedule::Cosine => {
                    let progress = step as f64 / total_updates as f64;
                    0.5 * config.learning_rate * (1.0 + (std::f64::consts::PI * progress).cos())
                }
            };
            match adam.as_mut() {
                Some(state) => state.update(&mut net, &grads, lr),
                None => apply_update(&mut net, &grads, lr),
            }
            epoch_loss += batch_loss;
            updates += 1;
            step += 1;
        }
        let stats = EpochStats {
            epoch,
            mean_loss: epoch_loss / train_set.len() as f64,
            updates,
        };
        observer(&stats, &net);
    }

    if net.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::Divergence {
            step,
            loss: f64::NAN,
        });
    }

    Ok(ModelCheckpoint {
        net,
        schedule: schedule.clone(),
        meta: TrainingMeta {
            epochs: config.epochs,
            train_set_size: train_set.len(),
            seed: config.seed,
            passes_per_datapoint: config.epochs,
        },
    })
}

// Parameters stay f32-representable so checkpoints round-trip exactly.
fn apply_update(net: &mut DenoiserNet, grads: &ParamGrads, lr: f64) {
    for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
        let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
        let deltas = g.weights.iter().chain(&g.bias);
        for (p, d) in params.zip(deltas) {
            *p = ((*p - lr * d) as f32) as f64;
        }
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    steps: i32,
}

impl AdamState {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            steps: 0,
        }
    }

    fn update(&mut self, net: &mut DenoiserNet, grads: &ParamGrads, lr: f64) {
        self.steps += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.steps);
        let c2 = 1.0 - Self::BETA2.powi(self.steps);
        let params = net.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()));
        let deltas = grads.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias));
        for (((p, g), m), v) in params.zip(deltas).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            let step = lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
            *p = ((*p - step) as f32) as f64;
        }
    }
}

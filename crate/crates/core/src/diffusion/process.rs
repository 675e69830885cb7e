//! Forward noising, the epsilon-matching loss and deterministic DDIM moves.

use super::net::{DenoiserNet, LatentState, ParamGrads};
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};

fn check_same_shape(x: &LatentState, eps: &[f64]) -> Result<()> {
    if x.len() != eps.len() {
        return Err(Error::contract(format!(
            "noise has {} values, grid has {}",
            eps.len(),
            x.len()
        )));
    }
    Ok(())
}

/// `sqrt(ab) * x0 + sqrt(1 - ab) * eps`.
pub(crate) fn noised(x0: &[f64], eps: &[f64], alpha_bar: f64) -> Vec<f64> {
    let a = alpha_bar.sqrt();
    let s = (1.0 - alpha_bar).sqrt();
    x0.iter().zip(eps).map(|(x, e)| a * x + s * e).collect()
}

/// Closed-form sample of `x_t` given `x_0` and the noise draw.
pub fn forward_diffuse(
    x0: &LatentState,
    t: usize,
    eps: &[f64],
    schedule: &NoiseSchedule,
) -> Result<LatentState> {
    check_same_shape(x0, eps)?;
    schedule.check_t(t)?;
    Ok(x0.with(noised(&x0.values, eps, schedule.alpha_bar(t)), t))
}

/// Squared error between the true noise and the network's prediction of it.
pub fn training_loss(
    net: &DenoiserNet,
    x0: &LatentState,
    t: usize,
    eps: &[f64],
    schedule: &NoiseSchedule,
) -> Result<f64> {
    let xt = forward_diffuse(x0, t, eps, schedule)?;
    let pred = net.predict_eps(&xt)?;
    Ok(squared_distance(&pred, eps))
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Loss at one `(t, eps)` with its gradient added into `grads` scaled by `weight`.
pub(crate) fn accumulate_loss_grad(
    net: &DenoiserNet,
    x0: &[f64],
    t: usize,
    eps: &[f64],
    schedule: &NoiseSchedule,
    weight: f64,
    grads: &mut ParamGrads,
) -> f64 {
    let xt = noised(x0, eps, schedule.alpha_bar(t));
    let cache = net.forward_cached(&xt, t);
    let d_out: Vec<f64> = cache
        .output
        .iter()
        .zip(eps)
        .map(|(p, e)| 2.0 * weight * (p - e))
        .collect();
    net.backward(&cache, &d_out, grads);
    squared_distance(&cache.output, eps)
}

/// Exact gradient of [`training_loss`] with respect to every parameter.
pub fn param_gradients(
    net: &DenoiserNet,
    x0: &LatentState,
    t: usize,
    eps: &[f64],
    schedule: &NoiseSchedule,
) -> Result<ParamGrads> {
    check_same_shape(x0, eps)?;
    schedule.check_t(t)?;
    let mut grads = ParamGrads::zeros_like(net);
    accumulate_loss_grad(net, &x0.values, t, eps, schedule, 1.0, &mut grads);
    Ok(grads)
}

/// Moves a grid between noise levels along the deterministic (eta = 0) path
/// implied by a fixed noise estimate.
pub(crate) fn ddim_move(x: &[f64], eps_hat: &[f64], ab_from: f64, ab_to: f64) -> Vec<f64> {
    let (sa_from, sn_from) = (ab_from.sqrt(), (1.0 - ab_from).sqrt());
    let (sa_to, sn_to) = (ab_to.sqrt(), (1.0 - ab_to).sqrt());
    x.iter()
        .zip(eps_hat)
        .map(|(xv, e)| {
            let x0_hat = (xv - sn_from * e) / sa_from;
            sa_to * x0_hat + sn_to * e
        })
        .collect()
}

/// One deterministic denoising step from `x.t` down to `t_prev`.
pub fn ddim_step(
    net: &DenoiserNet,
    x: &LatentState,
    t_prev: usize,
    schedule: &NoiseSchedule,
) -> Result<LatentState> {
    schedule.check_t(x.t)?;
    if t_prev >= x.t {
        return Err(Error::contract(format!(
            "denoising step must go down: t = {}, t_prev = {t_prev}",
            x.t
        )));
    }
    let eps_hat = net.predict_eps(x)?;
    let moved = ddim_move(&x.values, &eps_hat, schedule.alpha_bar(x.t), schedule.alpha_bar(t_prev));
    Ok(x.with(moved, t_prev))
}

/// One deterministic inversion step from `x.t` up to `t_next`.
pub fn ddim_invert_step(
    net: &DenoiserNet,
    x: &LatentState,
    t_next: usize,
    schedule: &NoiseSchedule,
) -> Result<LatentState> {
    schedule.check_t(t_next)?;
    if t_next <= x.t {
        return Err(Error::contract(format!(
            "inversion step must go up: t = {}, t_next = {t_next}",
            x.t
        )));
    }
    let eps_hat = net.predict_eps(x)?;
    let moved = ddim_move(&x.values, &eps_hat, schedule.alpha_bar(x.t), schedule.alpha_bar(t_next));
    Ok(x.with(moved, t_next))
}

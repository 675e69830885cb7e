//! Threshold attacks: lower scores mean "more likely a training member".

use rand::Rng as _;

use super::config::{AttackConfig, Method};
use super::probe::{Probe, QueryCount};
use super::sample_stream;
use crate::diffusion::{ddim_move, noised, squared_distance, LatentState, ModelCheckpoint};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackScore {
    pub score: f64,
    pub queries: QueryCount,
}

fn expect_method(cfg: &AttackConfig, allowed: &[Method]) -> Result<()> {
    if !allowed.contains(&cfg.method) {
        return Err(Error::config(format!("config is for {}, not {:?}", cfg.method, allowed)));
    }
    Ok(())
}

fn check_input(model: &ModelCheckpoint, x0: &LatentState, cfg: &AttackConfig) -> Result<()> {
    cfg.validate(model.schedule.steps())?;
    if x0.len() != model.net.pixels {
        return Err(Error::contract(format!(
            "image has {} pixels, model expects {}",
            x0.len(),
            model.net.pixels
        )));
    }
    Ok(())
}

/// Deterministic inversion along the grid followed by a one-step
/// reconstruction at every node. SecMI scores the squared reconstruction
/// error at the last node; SecMI++ averages it over all nodes.
pub fn secmi_score(model: &ModelCheckpoint, x0: &LatentState, cfg: &AttackConfig) -> Result<AttackScore> {
    expect_method(cfg, &[Method::SecMi, Method::SecMiPlusPlus])?;
    check_input(model, x0, cfg)?;
    let probe = Probe::new(model);
    let nodes = cfg.secmi_nodes();

    let mut path = Vec::with_capacity(nodes.len());
    path.push(x0.values.clone());
    for w in nodes.windows(2) {
        let x = path.last().unwrap();
        let eps = probe.eps(x, w[0]);
        path.push(ddim_move(x, &eps, probe.alpha_bar(w[0]), probe.alpha_bar(w[1])));
    }

    let mut distances = Vec::with_capacity(nodes.len() - 1);
    for i in 1..nodes.len() {
        let eps = probe.eps(&path[i], nodes[i]);
        let back = ddim_move(&path[i], &eps, probe.alpha_bar(nodes[i]), probe.alpha_bar(nodes[i - 1]));
        distances.push(squared_distance(&path[i - 1], &back));
    }

    let score = match cfg.method {
        Method::SecMiPlusPlus => distances.iter().sum::<f64>() / distances.len() as f64,
        _ => *distances.last().unwrap(),
    };
    Ok(AttackScore {
        score,
        queries: probe.count(),
    })
}

/// Sum over the grid of `|| eps_theta(x_t, t) - eps0 ||_2`, where `x_t` is
/// noised with the model's own estimate `eps0 = eps_theta(x0, 1)`.
pub fn pia_score(model: &ModelCheckpoint, x0: &LatentState, cfg: &AttackConfig) -> Result<AttackScore> {
    expect_method(cfg, &[Method::Pia])?;
    check_input(model, x0, cfg)?;
    let probe = Probe::new(model);
    let eps0 = probe.eps(&x0.values, 1);
    let mut score = 0.0;
    for &t in &cfg.grid {
        let t = t.max(1);
        let xt = noised(&x0.values, &eps0, probe.alpha_bar(t));
        score += squared_distance(&probe.eps(&xt, t), &eps0).sqrt();
    }
    Ok(AttackScore {
        score,
        queries: probe.count(),
    })
}

/// Bilinear sample of a row-major grid at fractional coordinates, clamped to
/// the border.
fn bilinear(img: &[f64], h: usize, w: usize, y: f64, x: f64) -> f64 {
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    let top = img[y0 * w + x0] * (1.0 - fx) + img[y0 * w + x1] * fx;
    let bottom = img[y1 * w + x0] * (1.0 - fx) + img[y1 * w + x1] * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Keeps the central `area` fraction of the image and resizes it back to the
/// full grid. `area = 1` returns the input unchanged.
pub fn center_crop_resize(img: &[f64], h: usize, w: usize, area: f64) -> Vec<f64> {
    let side = area.sqrt();
    let axis = |n: usize, i: usize| -> f64 {
        if n == 1 {
            return 0.0;
        }
        let span = side * n as f64;
        let start = (n as f64 - span) / 2.0;
        start + i as f64 * (span - 1.0).max(0.0) / (n - 1) as f64
    };
    let mut out = Vec::with_capacity(h * w);
    for i in 0..h {
        let y = axis(h, i);
        for j in 0..w {
            out.push(bilinear(img, h, w, y, axis(w, j)));
        }
    }
    out
}

/// Loss of `x` against the stored per-timestep noises, averaged over the grid.
fn grid_loss(probe: &Probe<'_>, x: &[f64], grid: &[usize], noises: &[Vec<f64>]) -> f64 {
    let total: f64 = grid
        .iter()
        .zip(noises)
        .map(|(&t, eps)| {
            let t = t.max(1);
            let xt = noised(x, eps, probe.alpha_bar(t));
            squared_distance(&probe.eps(&xt, t), eps)
        })
        .sum();
    total / grid.len() as f64
}

/// Loss of the image minus the mean loss of its cropped neighbours. Members
/// sit in a local loss minimum, so their score is more negative.
pub fn pfami_score(
    model: &ModelCheckpoint,
    x0: &LatentState,
    sample_id: u64,
    cfg: &AttackConfig,
) -> Result<AttackScore> {
    expect_method(cfg, &[Method::Pfami])?;
    check_input(model, x0, cfg)?;
    let probe = Probe::new(model);
    let params = cfg.pfami;
    let mut rng = sample_stream(cfg.seed, sample_id);
    let (lo, hi) = params.strength_interval;
    let strengths: Vec<f64> = (0..params.neighbors)
        .map(|_| lo + (hi - lo) * rng.random::<f64>())
        .collect();
    let draw_noises = |rng: &mut rng::Rng| -> Vec<Vec<f64>> {
        cfg.grid.iter().map(|_| rng::normal_vec(rng, x0.len())).collect()
    };
    let shared = draw_noises(&mut rng);

    let base = grid_loss(&probe, &x0.values, &cfg.grid, &shared);
    // running mean, exact when all neighbour losses coincide
    let mut neighbor_mean = 0.0;
    for (k, &s) in strengths.iter().enumerate() {
        let neighbor = center_crop_resize(&x0.values, x0.height, x0.width, s);
        let fresh;
        let noises = if params.shared_noise {
            &shared
        } else {
            fresh = draw_noises(&mut rng);
            &fresh
        };
        neighbor_mean += (grid_loss(&probe, &neighbor, &cfg.grid, noises) - neighbor_mean) / (k + 1) as f64;
    }
    Ok(AttackScore {
        score: base - neighbor_mean,
        queries: probe.count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_area_crop_is_identity() {
        let img: Vec<f64> = (0..64).map(|i| (i as f64 * 0.71).sin()).collect();
        assert_eq!(center_crop_resize(&img, 8, 8, 1.0), img);
    }

    #[test]
    fn crop_of_constant_is_constant() {
        let img = vec![0.25; 64];
        assert!(center_crop_resize(&img, 8, 8, 0.8).iter().all(|v| (*v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn crop_zooms_towards_center() {
        // linear ramp along x: a crop narrows the observed range symmetrically
        let img: Vec<f64> = (0..64).map(|i| (i % 8) as f64).collect();
        let out = center_crop_resize(&img, 8, 8, 0.5);
        assert!(out[0] > 0.0 && out[7] < 7.0);
        assert!((out[0] + out[7] - 7.0).abs() < 1e-12);
    }
}

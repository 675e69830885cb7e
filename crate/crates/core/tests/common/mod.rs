#![allow(dead_code)]

use miabench::diffusion::{
    training_loss, Activation, DenoiserNet, LatentState, Layer, ModelCheckpoint, NoiseSchedule, ScheduleParams,
    TrainingMeta,
};
use miabench::rng;
use rand::Rng;

pub fn schedule(steps: usize) -> NoiseSchedule {
    ScheduleParams::rescaled_linear(steps).build().unwrap()
}

pub fn meta() -> TrainingMeta {
    TrainingMeta {
        epochs: 1,
        train_set_size: 1,
        seed: 1,
        passes_per_datapoint: 1,
    }
}

pub fn checkpoint(net: DenoiserNet, steps: usize) -> ModelCheckpoint {
    ModelCheckpoint {
        net,
        schedule: schedule(steps),
        meta: meta(),
    }
}

/// Random net with biases perturbed too, so every parameter matters.
pub fn random_net(pixels: usize, embed: usize, hidden: &[usize], act: Activation, steps: usize, seed: u64) -> DenoiserNet {
    let mut net = DenoiserNet::new(pixels, embed, hidden, act, steps, seed);
    let mut r = rng::rng_from(seed ^ 0xb1a5);
    let mut p = net.params();
    for v in &mut p {
        *v += 0.1 * (r.random::<f64>() - 0.5);
    }
    net.set_params(&p).unwrap();
    net
}

/// Net whose output is the constant `c` everywhere.
pub fn constant_net(pixels: usize, embed: usize, c: f64) -> DenoiserNet {
    let mut layers = vec![Layer::zeros(pixels + embed, 4), Layer::zeros(4, pixels)];
    layers[1].bias = vec![c; pixels];
    DenoiserNet::from_layers(pixels, embed, 100, Activation::Tanh, layers).unwrap()
}

pub fn uniform_vec(r: &mut rng::Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| lo + (hi - lo) * r.random::<f64>()).collect()
}

/// O(n^2) AUC: P(member < non-member) + half the ties.
pub fn pairwise_auc(entries: &[(f64, u8)]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for a in entries.iter().filter(|e| e.1 == 1) {
        for b in entries.iter().filter(|e| e.1 == 0) {
            pairs += 1.0;
            if a.0 < b.0 {
                num += 1.0;
            } else if a.0 == b.0 {
                num += 0.5;
            }
        }
    }
    num / pairs
}

/// Best TPR with FPR <= budget over thresholds at every score and every
/// midpoint between consecutive distinct scores, plus one below all scores.
pub fn midpoint_search(entries: &[(f64, u8)], budget_fraction: f64) -> f64 {
    let mut distinct: Vec<f64> = entries.iter().map(|e| e.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut cands = vec![distinct[0] - 1.0];
    cands.extend(distinct.iter().copied());
    cands.extend(distinct.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    let pos = entries.iter().filter(|e| e.1 == 1).count() as f64;
    let neg = entries.iter().filter(|e| e.1 == 0).count() as f64;
    let mut best = 0.0f64;
    for tau in cands {
        let tp = entries.iter().filter(|e| e.1 == 1 && e.0 <= tau).count() as f64;
        let fp = entries.iter().filter(|e| e.1 == 0 && e.0 <= tau).count() as f64;
        if fp / neg <= budget_fraction + 1e-15 {
            best = best.max(tp / pos);
        }
    }
    best
}

/// Random labelled score set with both classes, possibly with ties.
pub fn random_scores(r: &mut rng::Rng, max_n: usize) -> Vec<(f64, u8)> {
    let n = r.random_range(4..=max_n);
    let ties = r.random::<bool>();
    let mut e: Vec<(f64, u8)> = (0..n)
        .map(|i| {
            let y = (i % 2) as u8;
            let mut s = r.random::<f64>() + if y == 1 { -0.2 } else { 0.2 };
            if ties {
                s = (s * 5.0).round() / 5.0;
            }
            (s, y)
        })
        .collect();
    // shuffle labels a little so order carries no information
    for i in (1..e.len()).rev() {
        let j = r.random_range(0..=i);
        e.swap(i, j);
    }
    e
}

/// Central differences of the training loss in every parameter.
pub fn central_difference(net: &DenoiserNet, x0: &LatentState, t: usize, eps: &[f64], sched: &NoiseSchedule) -> Vec<f64> {
    let base = net.params();
    let h = 1e-4;
    let mut out = Vec::with_capacity(base.len());
    let mut probe = net.clone();
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_params(&p).unwrap();
        let up = training_loss(&probe, x0, t, eps, sched).unwrap();
        p[i] = base[i] - h;
        probe.set_params(&p).unwrap();
        let down = training_loss(&probe, x0, t, eps, sched).unwrap();
        out.push((up - down) / (2.0 * h));
    }
    out
}

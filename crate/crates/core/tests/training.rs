mod common;

use miabench::data::make_setup;
use miabench::diffusion::*;
use miabench::harness::{preset, ExperimentConfig};
use miabench::rng;

/// Mean loss over samples with fixed (t, eps) draws so checkpoints are
/// compared on common random numbers.
fn mean_loss(net: &DenoiserNet, samples: &[Vec<f64>], draws: &[(usize, Vec<f64>)], sched: &NoiseSchedule) -> f64 {
    let mut total = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let x0 = LatentState::new(s.clone(), 8, 8, 0).unwrap();
        for (t, eps) in &draws[i * 8..(i + 1) * 8] {
            total += training_loss(net, &x0, *t, eps, sched).unwrap();
        }
    }
    total / (samples.len() * 8) as f64
}

#[test]
fn overtraining_gap_widens() {
    let cfg = ExperimentConfig::default();
    let setup = preset("analog-a").unwrap();
    // held-out samples from the member distribution itself
    let split = make_setup(&setup.member, &setup.member, cfg.image, 64, 32, cfg.seed).unwrap();
    let sched = cfg.schedule.build().unwrap();
    let net = DenoiserNet::new(64, cfg.model.embed_width, &cfg.model.hidden, cfg.model.activation, 100, 1);

    let members: Vec<Vec<f64>> = split.train_set.iter().map(|s| s.pixels.clone()).collect();
    let held_out: Vec<Vec<f64>> = split
        .nonmembers_val
        .iter()
        .chain(&split.nonmembers_test)
        .map(|s| s.pixels.clone())
        .collect();
    let mut r = rng::rng_from(77);
    let draws: Vec<(usize, Vec<f64>)> = (0..64 * 8)
        .map(|k| (1 + (k * 37) % 100, rng::normal_vec(&mut r, 64)))
        .collect();

    let mut gaps = Vec::new();
    // log-spaced: the learning rate decays, so late changes are small
    let checkpoints = [1, 2, 4, 8, 16, 32, 64, 128, 256, 300];
    train_with_observer(net, &members, &setup.train.to_train_config(1), &sched, |s, net| {
        if checkpoints.contains(&s.epoch) {
            let m = mean_loss(net, &members, &draws, &sched);
            let h = mean_loss(net, &held_out, &draws, &sched);
            gaps.push(h - m);
        }
    })
    .unwrap();
    eprintln!("gaps {gaps:?}");
    assert!(gaps.last().unwrap() > &0.0);
    let widening = gaps.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(
        widening as f64 >= 0.8 * (gaps.len() - 1) as f64,
        "gap widened in {widening} of {} pairs: {gaps:?}",
        gaps.len() - 1
    );
}

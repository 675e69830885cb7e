mod common;

use common::*;
use miabench::classifier::*;
use miabench::data::*;
use miabench::eval::{compute_auc, ScoreSet};
use miabench::rng;
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn gaussian_rows(r: &mut rng::Rng, n: usize, d: usize, offset: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| rng::normal_vec(r, d).into_iter().map(|x| x + offset).collect()).collect()
}

fn training_auc(model: &BoostedEnsemble, rows: &[Vec<f64>], labels: &[u8]) -> f64 {
    let p = model.predict_proba_batch(rows).unwrap();
    // lower score = member, so score with 1 - p
    let entries = p.iter().zip(labels).map(|(p, &y)| (1.0 - p, y)).collect();
    compute_auc(&ScoreSet::new(entries, "m", "val").unwrap()).unwrap()
}

#[test]
fn permuted_labels_are_hard_for_ten_stumps() {
    let mut r = rng::rng_from(21);
    let rows = gaussian_rows(&mut r, 500, 5, 0.0);
    let mut labels: Vec<u8> = (0..500).map(|i| (i % 2) as u8).collect();
    labels.shuffle(&mut r);
    let model = fit_boosted(&rows, &labels, &BoostConfig::stumps(10, 0.3)).unwrap();
    let auc = training_auc(&model, &rows, &labels);
    assert!(auc <= 0.75, "auc = {auc}");
}

#[test]
fn separable_line_fits_in_few_stumps() {
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
    let labels: Vec<u8> = (0..40).map(|i| u8::from(i < 20)).collect();
    let model = fit_boosted(&rows, &labels, &BoostConfig::stumps(5, 0.3)).unwrap();
    assert_eq!(model.train_accuracy, 1.0);
    assert_eq!(model.trees[0].as_stump().unwrap().0, 0);
}

#[test]
fn empty_ensemble_predicts_prior() {
    let rows = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
    let labels = [1, 0, 0, 0];
    let model = fit_boosted(&rows, &labels, &BoostConfig::stumps(0, 0.3)).unwrap();
    assert!(model.trees.is_empty());
    assert!((model.predict_proba(&[9.0]).unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn single_stump_follows_formula() {
    let rows = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
    let labels = [1, 1, 0, 0];
    let model = fit_boosted(&rows, &labels, &BoostConfig::stumps(1, 0.5)).unwrap();
    let (feature, threshold, left, _) = model.trees[0].as_stump().unwrap();
    assert_eq!((feature, threshold), (0, 1.5));
    let expected = 1.0 / (1.0 + (-(model.base_score + 0.5 * left)).exp());
    assert_eq!(model.predict_proba(&[0.2]).unwrap(), expected);
}

#[test]
fn fit_errors() {
    let rows = vec![vec![0.0], vec![1.0]];
    assert!(fit_boosted(&rows, &[1, 1], &BoostConfig::default()).is_err());
    assert!(fit_boosted(&rows[..1], &[1], &BoostConfig::default()).is_err());
    let model = fit_boosted(&rows, &[1, 0], &BoostConfig::default()).unwrap();
    assert!(model.predict_proba(&[0.0, 1.0]).is_err());
    let pts = [[0.0; 3], [1.0; 3]];
    assert!(fit_hyperplane(&pts, &[0, 0], &HyperplaneConfig::default()).is_err());
    assert!(fit_pca3(&rows).is_err());
}

#[test]
fn pca_recovers_a_line() {
    let mut r = rng::rng_from(5);
    let dir = [1.0, -2.0, 0.5, 3.0, 0.0];
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            let t = rng::normal_vec(&mut r, 1)[0] * 3.0;
            dir.iter().enumerate().map(|(i, d)| d * t + i as f64).collect()
        })
        .collect();
    let p = fit_pca3(&rows).unwrap();
    let cos: f64 = p.components[0].iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>() / norm;
    assert!(cos.abs() >= 1.0 - 1e-6, "cos = {cos}");
    assert!(p.variances[1] <= 1e-10 && p.variances[2] <= 1e-10, "{:?}", p.variances);
    assert!(p.degenerate);
    assert_orthonormal(&p);
}

#[test]
fn pca_isotropic_shares_are_even() {
    let mut r = rng::rng_from(6);
    let rows = gaussian_rows(&mut r, 5000, 3, 0.0);
    let p = fit_pca3(&rows).unwrap();
    let total: f64 = p.variances.iter().sum();
    let shares: Vec<f64> = p.variances.iter().map(|v| v / total).collect();
    let (lo, hi) = (shares[2], shares[0]);
    assert!((hi - lo) / hi <= 0.10, "{shares:?}");
    assert_orthonormal(&p);
}

fn assert_orthonormal(p: &PcaProjector) {
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = p.components[i].iter().zip(&p.components[j]).map(|(a, b)| a * b).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((dot - want).abs() <= 1e-8, "<c{i}, c{j}> = {dot}");
        }
    }
}

#[test]
fn separated_clusters_are_split() {
    let mut r = rng::rng_from(7);
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for y in [0u8, 1] {
        for _ in 0..100 {
            let c = if y == 1 { 1.0 } else { -1.0 };
            let v = uniform_vec(&mut r, 3, -0.4, 0.4);
            pts.push([c + v[0], v[1], v[2]]);
            labels.push(y);
        }
    }
    let h = fit_hyperplane(&pts, &labels, &HyperplaneConfig::default()).unwrap();
    assert!(pts.iter().zip(&labels).all(|(z, &y)| h.is_member(z) == (y == 1)));
}

#[test]
fn identical_clusters_give_chance_accuracy() {
    let mut r = rng::rng_from(8);
    let draw = |r: &mut rng::Rng| -> (Vec<[f64; 3]>, Vec<u8>) {
        (0..1000)
            .map(|i| {
                let v = rng::normal_vec(r, 3);
                ([v[0], v[1], v[2]], (i % 2) as u8)
            })
            .unzip()
    };
    let (train, train_y) = draw(&mut r);
    let (held, held_y) = draw(&mut r);
    let h = fit_hyperplane(&train, &train_y, &HyperplaneConfig::default()).unwrap();
    let correct = held.iter().zip(&held_y).filter(|(z, &y)| h.is_member(z) == (y == 1)).count();
    let acc = correct as f64 / held.len() as f64;
    assert!((0.4..=0.6).contains(&acc), "accuracy = {acc}");
}

fn degenerate_split() -> BenchmarkSplit {
    let spec = DistributionSpec::new(GAUSSIAN_FIELD);
    let mut split = make_setup(&spec, &spec, ImageShape::default(), 40, 10, 9).unwrap();
    let relabel = |src: &[ImageSample], base: u64| -> Vec<ImageSample> {
        src.iter()
            .enumerate()
            .map(|(k, s)| ImageSample {
                id: base + k as u64,
                ..s.clone()
            })
            .collect()
    };
    split.nonmembers_val = relabel(&split.members_val, 1000);
    split.nonmembers_test = relabel(&split.members_test, 2000);
    split
}

#[test]
fn identical_lists_give_equal_rates() {
    let split = degenerate_split();
    let (h, w) = (split.shape.height, split.shape.width);
    let out = shift_report(&split, |s| blind_extractor(s, h, w), &HyperplaneConfig::default()).unwrap();
    for rates in [out.report.val, out.report.test] {
        assert_eq!(rates.tpr, rates.fpr);
        assert!((rates.tpr + rates.fnr - 1.0).abs() < 1e-9);
        assert!((rates.fpr + rates.tnr - 1.0).abs() < 1e-9);
    }
    assert_eq!(out.embeddings.len(), 40);
    let csv = String::from_utf8(embeddings_csv(&out.embeddings).unwrap()).unwrap();
    assert!(csv.starts_with("sample_id,split,label,z0,z1,z2\n"));
}

#[test]
fn models_round_trip_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng::rng_from(10);
    let rows = gaussian_rows(&mut r, 60, 4, 0.0);
    let labels: Vec<u8> = (0..60).map(|i| u8::from(rows[i][0] > 0.0)).collect();
    let model = fit_boosted(&rows, &labels, &BoostConfig::default()).unwrap();
    let path = dir.path().join("m.json");
    save_model(&model, &path).unwrap();
    let back: BoostedEnsemble = load_model(&path).unwrap();
    assert_eq!(back, model);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn batch_matches_single(seed in 0u64..10_000, depth in 1usize..7) {
        let mut r = rng::rng_from(seed);
        let rows = gaussian_rows(&mut r, 80, 4, 0.0);
        let labels: Vec<u8> = rows.iter().map(|x| u8::from(x[0] + 0.5 * x[1] > 0.2)).collect();
        let cfg = BoostConfig { n_estimators: 20, max_depth: depth, ..BoostConfig::default() };
        let model = fit_boosted(&rows, &labels, &cfg).unwrap();
        let probe = gaussian_rows(&mut r, 30, 4, 0.0);
        let batch = model.predict_proba_batch(&probe).unwrap();
        for (x, b) in probe.iter().zip(&batch) {
            prop_assert_eq!(model.predict_proba(x).unwrap().to_bits(), b.to_bits());
        }
    }

    #[test]
    fn training_loss_is_monotone(seed in 0u64..10_000, depth in 1usize..7, lr in 0.05f64..1.5) {
        let mut r = rng::rng_from(seed);
        let rows = gaussian_rows(&mut r, 60, 3, 0.0);
        let mut labels: Vec<u8> = (0..60).map(|i| (i % 2) as u8).collect();
        labels.shuffle(&mut r);
        let cfg = BoostConfig { n_estimators: 30, max_depth: depth, learning_rate: lr, ..BoostConfig::default() };
        let model = fit_boosted(&rows, &labels, &cfg).unwrap();
        for w in model.train_loss.windows(2) {
            prop_assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn fits_are_deterministic(seed in 0u64..10_000) {
        let mut r = rng::rng_from(seed);
        let rows = gaussian_rows(&mut r, 40, 3, 0.0);
        let labels: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        let cfg = BoostConfig { n_estimators: 10, ..BoostConfig::default() };
        prop_assert_eq!(fit_boosted(&rows, &labels, &cfg).unwrap(), fit_boosted(&rows, &labels, &cfg).unwrap());
        prop_assert_eq!(fit_pca3(&rows).unwrap(), fit_pca3(&rows).unwrap());
    }

    #[test]
    fn pca_reconstruction_is_monotone(seed in 0u64..10_000, d in 3usize..8) {
        let mut r = rng::rng_from(seed);
        let rows = gaussian_rows(&mut r, 50, d, 0.0);
        let p = fit_pca3(&rows).unwrap();
        let e: Vec<f64> = (0..=3).map(|k| p.reconstruction_error(&rows, k)).collect();
        for w in e.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].max(1.0));
        }
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = p.components[i].iter().zip(&p.components[j]).map(|(a, b)| a * b).sum();
                prop_assert!((dot - f64::from(u8::from(i == j))).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn hyperplane_sign_pattern_survives_scaling(seed in 0u64..10_000, c in 0.5f64..4.0) {
        let mut r = rng::rng_from(seed);
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let y = (i % 2) as u8;
            let v = rng::normal_vec(&mut r, 3);
            let m = if y == 1 { 0.8 } else { -0.8 };
            pts.push([v[0] + m, v[1] + 0.5 * m, v[2]]);
            labels.push(y);
        }
        let cfg = HyperplaneConfig::default();
        let base = fit_hyperplane(&pts, &labels, &cfg).unwrap();
        let scaled: Vec<[f64; 3]> = pts.iter().map(|p| p.map(|x| x * c)).collect();
        let cfg_scaled = HyperplaneConfig { learning_rate: cfg.learning_rate / (c * c), ..cfg };
        let refit = fit_hyperplane(&scaled, &labels, &cfg_scaled).unwrap();
        let agree = pts.iter().zip(&scaled).filter(|(a, b)| base.is_member(a) == refit.is_member(b)).count();
        prop_assert_eq!(agree, pts.len());
    }

    #[test]
    fn rates_are_complementary(pred in prop::collection::vec(any::<bool>(), 4..60), seed in 0u64..1000) {
        let mut labels: Vec<u8> = (0..pred.len()).map(|i| (i % 2) as u8).collect();
        labels.shuffle(&mut rng::rng_from(seed));
        let s = SplitRates::from_predictions(&pred, &labels).unwrap();
        prop_assert!((s.tpr + s.fnr - 1.0).abs() <= 1e-9);
        prop_assert!((s.fpr + s.tnr - 1.0).abs() <= 1e-9);
    }
}

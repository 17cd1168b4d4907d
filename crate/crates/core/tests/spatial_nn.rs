mod common;

use common::*;
use evstp_core::spatial_nn::{loss_and_gradient, train, train_warm, NNTrainConfig, Sample, SpatialPredictor, Weights};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn random_weights<R: Rng>(rng: &mut R, input_dim: usize, hidden: usize) -> Weights {
    let mut w = Weights::zeros(input_dim, hidden);
    let flat: Vec<f64> = (0..w.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
    w.set_flat(&flat);
    w
}

#[test]
fn backprop_matches_central_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let input_dim = rng.gen_range(1..=5);
        let hidden = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=8);
        let l2 = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..0.1) };
        let w = random_weights(&mut rng, input_dim, hidden);
        let xs: Vec<f64> = (0..n * input_dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let zs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();

        let (loss, grad) = loss_and_gradient(&w, input_dim, &xs, &zs, l2);
        assert!((loss - nn_objective(&w, input_dim, &xs, &zs, l2)).abs() < 1e-12 * loss.max(1.0));

        let mut probe = w.clone();
        let numeric = central_difference(&w.to_flat(), 1e-6, |p| {
            probe.set_flat(p);
            nn_objective(&probe, input_dim, &xs, &zs, l2)
        });
        let err = relative_error(&grad.to_flat(), &numeric);
        assert!(err < 1e-4, "relative error {err}");
    }
}

fn linear_fixture(n: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.01).unwrap();
    (0..n)
        .map(|_| {
            let x: f64 = rng.gen_range(0.0..1.0);
            Sample { input: vec![x], target: 3.0 * x + noise.sample(&mut rng) }
        })
        .collect()
}

fn mse(model: &evstp_core::spatial_nn::NNModel, data: &[Sample]) -> f64 {
    data.iter().map(|s| (model.predict(&s.input).unwrap() - s.target).powi(2)).sum::<f64>() / data.len() as f64
}

fn variance(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = v.clone().count() as f64;
    let m = v.clone().sum::<f64>() / n;
    v.map(|x| (x - m).powi(2)).sum::<f64>() / n
}

#[test]
fn fits_linear_fixture() {
    let data = linear_fixture(200, 22);
    let (model, report) = train(&data, &NNTrainConfig::default()).unwrap();
    let var = variance(data.iter().map(|s| s.target));
    let fit = mse(&model, &data);
    assert!(fit < 0.01 * var, "mse {fit} vs variance {var}");
    assert!(report.final_loss <= report.initial_loss);
}

#[test]
fn same_seed_same_model() {
    let data = linear_fixture(50, 23);
    let cfg = NNTrainConfig { max_epochs: 300, rng_seed: 9, ..Default::default() };
    let a = train(&data, &cfg).unwrap().0;
    let b = train(&data, &cfg).unwrap().0;
    assert_eq!(a, b);
    let c = train(&data, &NNTrainConfig { rng_seed: 10, ..cfg }).unwrap().0;
    assert_ne!(a.weights, c.weights);
}

#[test]
fn sample_order_does_not_matter() {
    let data = linear_fixture(60, 24);
    let mut shuffled = data.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let cfg = NNTrainConfig { max_epochs: 300, ..Default::default() };
    assert_eq!(train(&data, &cfg).unwrap().0, train(&shuffled, &cfg).unwrap().0);
}

#[test]
fn warm_start_does_not_lose_ground() {
    let data = linear_fixture(80, 25);
    let cfg = NNTrainConfig { max_epochs: 200, ..Default::default() };
    let (model, report) = train(&data, &cfg).unwrap();
    let (warm, warm_report) = train_warm(&model, &data, &cfg).unwrap();
    assert!(warm_report.initial_loss <= report.final_loss + 1e-12);
    assert!(warm_report.final_loss <= warm_report.initial_loss);
    assert_eq!(warm.input_scaler, model.input_scaler);
    assert_eq!(warm.target_scaler, model.target_scaler);
}

#[test]
fn online_retraining_appends_and_moves() {
    let data = linear_fixture(40, 26);
    let cfg = NNTrainConfig { max_epochs: 200, online_epochs: 20, ..Default::default() };
    let (mut sp, _) = SpatialPredictor::fit(data, cfg).unwrap();
    let before = sp.model.clone();
    let report = sp.retrain_online(Sample { input: vec![0.5], target: 4.0 }).unwrap();
    assert_eq!(sp.data.len(), 41);
    assert!(report.epochs <= 20);
    assert_ne!(sp.model.weights, before.weights);
}

#[test]
fn rejects_bad_data() {
    let cfg = NNTrainConfig::default();
    assert!(train(&[], &cfg).is_err());
    let one = vec![Sample { input: vec![1.0], target: 1.0 }];
    assert!(train(&one, &cfg).is_err());
    let ragged = vec![Sample { input: vec![1.0], target: 1.0 }, Sample { input: vec![1.0, 2.0], target: 1.0 }];
    assert!(train(&ragged, &cfg).is_err());
    let nan = vec![Sample { input: vec![f64::NAN], target: 1.0 }, Sample { input: vec![1.0], target: 1.0 }];
    assert!(train(&nan, &cfg).is_err());
}

#[test]
fn prediction_is_never_negative() {
    let data: Vec<Sample> = (0..20).map(|i| Sample { input: vec![i as f64], target: 0.0 }).collect();
    let (model, _) = train(&data, &NNTrainConfig { max_epochs: 50, ..Default::default() }).unwrap();
    for x in [-100.0, 0.0, 5.0, 1e6] {
        assert!(model.predict(&[x]).unwrap() >= 0.0);
    }
}

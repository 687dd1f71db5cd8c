use phasemotion::data::{make_windows, synth_dataset, SampleWindow, SynthKind, DEFAULT_FPS};
use phasemotion::training::{self, LossWeights, TrainConfig};
use phasemotion::{AblationSpec, Model, ModelConfig, Skeleton, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny(horizon: usize) -> ModelConfig {
    ModelConfig {
        hidden: 8,
        horizon,
        ..ModelConfig::default()
    }
}

fn cv_windows(count: usize, horizon: usize, first_seed: u64) -> Vec<SampleWindow> {
    let ds = synth_dataset(SynthKind::ConstantVelocity, &Skeleton::toy(), 10 + horizon, first_seed, count).unwrap();
    make_windows(&ds, 9, horizon, 1).unwrap()
}

fn tail_losses(seed: u64, dropout: f64, windows: &[SampleWindow]) -> Vec<f64> {
    let mut model = Model::new(tiny(10), Skeleton::toy(), seed).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        seed,
        dropout,
        ..TrainConfig::default()
    };
    let out = training::train(&mut model, windows, &[], DEFAULT_FPS, &cfg, None, |_| {}).unwrap();
    out.log[150..].iter().map(|r| r.train_loss).collect()
}

#[test]
fn deterministic_objective_descends_monotonically_late_in_training() {
    let windows = cv_windows(16, 10, 0);
    let monotone = (0..20u64)
        .filter(|&seed| tail_losses(seed, 0.0, &windows).windows(2).all(|p| p[1] <= p[0]))
        .count();
    assert!(monotone >= 19, "only {monotone}/20 seeds non-increasing");
}

#[test]
fn noisy_objective_still_trends_down() {
    // dropout makes single epochs fluctuate; the trend over 50 epochs must not
    let windows = cv_windows(16, 10, 0);
    for seed in 0..4u64 {
        let tail = tail_losses(seed, 0.05, &windows);
        assert!(tail[49] < tail[0], "seed {seed}: {} -> {}", tail[0], tail[49]);
    }
}

#[test]
fn zero_learning_rate_leaves_parameters_untouched() {
    let windows = cv_windows(4, 5, 3);
    let mut model = Model::new(tiny(5), Skeleton::toy(), 1).unwrap();
    let before = model.params().clone();
    let cfg = TrainConfig {
        epochs: 3,
        learning_rate: 0.0,
        batch_size: 2,
        ..TrainConfig::default()
    };
    training::train(&mut model, &windows, &[], DEFAULT_FPS, &cfg, None, |_| {}).unwrap();
    for ((n, a), (_, b)) in before.iter().zip(model.params().iter()) {
        assert_eq!(a, b, "{n} moved");
    }
}

#[test]
fn implicit_off_gives_refiner_exactly_zero_gradient() {
    let windows = cv_windows(2, 5, 8);
    let cfg = tiny(5);
    let off = ModelConfig {
        ablation: AblationSpec {
            use_implicit: false,
            ..AblationSpec::FULL
        },
        ..cfg.clone()
    };
    for (config, expect_zero) in [(off, true), (cfg, false)] {
        let model = Model::new(config, Skeleton::toy(), 2).unwrap();
        let (_, grads) = training::sample_gradients(&model, &windows[0], &TrainConfig::default(), None).unwrap();
        let refiner_norm: f64 = model.refiner_param_indices().iter().map(|&i| grads[i].norm_sq()).sum();
        assert_eq!(refiner_norm == 0.0, expect_zero, "refiner gradient norm² {refiner_norm}");
    }
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

#[test]
fn weighted_loss_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..30 {
        let (n, j) = (rng.gen_range(1..6), rng.gen_range(1..6));
        let pred = random(&mut rng, &[n, j, 3], 20.0);
        let truth = random(&mut rng, &[n, j, 3], 20.0);
        let w: Vec<f64> = (0..n * j).map(|_| rng.gen_range(0.0..2.0)).collect();
        let lw = LossWeights::from_raw(n, j, w.clone()).unwrap();
        let mut want = 0.0;
        for i in 0..n {
            for jj in 0..j {
                let mut sq = 0.0;
                for c in 0..3 {
                    sq += (pred.at3(i, jj, c) - truth.at3(i, jj, c)).powi(2);
                }
                want += w[i * j + jj] * sq;
            }
        }
        let got = training::weighted_loss(&pred, &truth, &lw).unwrap();
        assert!((got - want).abs() <= 1e-12 * want.max(1.0));
    }
}

proptest! {
    #[test]
    fn loss_vanishes_exactly_when_prediction_matches(seed in any::<u64>(), n in 1usize..5, j in 1usize..5, bump in 1usize..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = random(&mut rng, &[n, j, 3], 50.0);
        let w: Vec<f64> = (0..n * j).map(|_| rng.gen_range(0.1..2.0)).collect();
        let lw = LossWeights::from_raw(n, j, w).unwrap();
        prop_assert_eq!(training::weighted_loss(&truth, &truth, &lw).unwrap(), 0.0);
        let mut off = truth.clone();
        let k = bump % off.len();
        off.data_mut()[k] += 1e-3;
        prop_assert!(training::weighted_loss(&off, &truth, &lw).unwrap() > 0.0);
    }
}

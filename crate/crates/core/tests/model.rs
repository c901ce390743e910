use dcae_core::corpus::{build_pairs, synthetic_records, CorpusConfig};
use dcae_core::model::{build_model, count_params, search_hidden_widths, train};
use dcae_core::nn::{check_network_gradients, Mode};
use dcae_core::{DcaeConfig, DcaeModel, NoisyCleanPair, Tensor3, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reduced(input_length: usize) -> DcaeConfig {
    DcaeConfig {
        encoder_channels: vec![1, 2, 3, 4],
        kernel_sizes: vec![7, 5, 3],
        input_length,
        ..DcaeConfig::default()
    }
}

#[test]
fn reduced_dcae_gradients_match_finite_differences() {
    for seed in 0..20u64 {
        let mut model = build_model(&reduced(64), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let x: Vec<f64> = (0..2 * 64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r: Vec<f64> = (0..2 * 64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Tensor3::from_vec(x, (2, 1, 64)).unwrap();
        let mode = if seed % 2 == 0 {
            Mode::Train
        } else {
            Mode::Eval
        };
        let rep = check_network_gradients(&mut model.net, &x, &r, mode, seed, 1e-5).unwrap();
        assert!(rep.worst() < 1e-4, "seed {seed}: {rep:?}");
        // every parameter tensor plus the input
        assert_eq!(rep.tensors.len(), 1 + model.params().len());
    }
}

#[test]
fn default_widths_are_the_only_monotone_match() {
    let cfg = DcaeConfig::default();
    assert_eq!(count_params(&build_model(&cfg, 0).unwrap()), 61_345);
    let found = search_hidden_widths(61_345, &cfg.kernel_sizes, 32, 64);
    assert_eq!(found, vec![vec![1, 4, 8, 16, 32]]);
}

fn small_pairs(first: u32, subjects: u32, seed: u64) -> Vec<NoisyCleanPair> {
    let mut cfg = CorpusConfig::default();
    cfg.mix.seed = seed;
    let records = synthetic_records(first, subjects, 20.0, 100.0, seed).unwrap();
    build_pairs(&records, &cfg).unwrap()
}

fn small_config() -> DcaeConfig {
    DcaeConfig {
        encoder_channels: vec![1, 4, 8],
        kernel_sizes: vec![15, 9],
        ..DcaeConfig::default()
    }
}

fn mse(model: &DcaeModel, pairs: &[NoisyCleanPair]) -> f64 {
    let noisy: Vec<_> = pairs.iter().map(|p| &p.noisy).collect();
    let out = model.denoise_all(&noisy).unwrap();
    let n = (pairs.len() * pairs[0].clean.len()) as f64;
    pairs
        .iter()
        .zip(&out)
        .flat_map(|(p, o)| p.clean.samples.iter().zip(&o.samples))
        .map(|(c, o)| (c - o).powi(2))
        .sum::<f64>()
        / n
}

#[test]
fn training_reduces_validation_loss() {
    let train_pairs: Vec<_> = small_pairs(0, 19, 1).into_iter().take(200).collect();
    let val = small_pairs(500, 2, 2);
    let mut improved = 0;
    for seed in 0..10 {
        let model = build_model(&small_config(), seed).unwrap();
        let before = mse(&model, &val);
        let cfg = TrainConfig {
            max_epochs: 3,
            seed,
            ..TrainConfig::default()
        };
        let (trained, h) = train(model, &train_pairs, &val, &cfg).unwrap();
        assert!(h.train_loss.iter().all(|v| v.is_finite()));
        if mse(&trained, &val) < before {
            improved += 1;
        }
    }
    assert!(improved >= 9, "{improved}/10");
}

#[test]
fn training_is_reproducible() {
    let train_pairs: Vec<_> = small_pairs(0, 4, 3).into_iter().take(64).collect();
    let val = small_pairs(500, 1, 4);
    let cfg = TrainConfig {
        max_epochs: 2,
        seed: 7,
        ..TrainConfig::default()
    };
    let run = || {
        let model = build_model(&small_config(), 7).unwrap();
        train(model, &train_pairs, &val, &cfg).unwrap()
    };
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(ha, hb);
    let flat = |m: &DcaeModel| {
        m.named_tensors()
            .iter()
            .flat_map(|t| t.data.iter().map(|v| v.to_bits()))
            .collect::<Vec<_>>()
    };
    assert_eq!(flat(&a), flat(&b));
}

use dcae_core::dsp::{bandpass_filter, welch_psd};
use dcae_core::noise::{compute_snr, gen_pink_noise, mix_at_snr};
use dcae_core::SignalWindow;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn mixing_hits_the_target_snr() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..1000 {
        let n = rng.random_range(64..1500);
        let clean: Vec<f64> = (0..n)
            .map(|k| (k as f64 * 0.07).sin() + 0.1 * rng.random::<f64>())
            .collect();
        let noise: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let target = rng.random_range(-20.0..20.0);
        let w = SignalWindow::new(clean, 100.0, 0).unwrap();
        let pair = mix_at_snr(&w, &noise, target).unwrap();
        let achieved = compute_snr(&pair.clean.samples, &pair.noisy.samples).unwrap();
        assert!(
            (achieved - target).abs() <= 1e-6,
            "{i}: {achieved} vs {target}"
        );
        assert!((pair.achieved_snr - achieved).abs() <= 1e-9);
    }
}

fn log_log_slope(freqs: &[f64], power: &[f64], lo: f64, hi: f64) -> f64 {
    let pts: Vec<(f64, f64)> = freqs
        .iter()
        .zip(power)
        .filter(|(f, _)| (lo..=hi).contains(*f))
        .map(|(f, p)| (f.log10(), p.log10()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn pink_noise_has_inverse_frequency_spectrum() {
    let mut mean: Vec<f64> = Vec::new();
    let mut freqs = Vec::new();
    let seeds = 200;
    for seed in 0..seeds {
        let x = gen_pink_noise(4000, 100.0, seed).unwrap();
        let p = welch_psd(&x, 100.0, 4.0, 0.5).unwrap();
        if mean.is_empty() {
            mean = vec![0.0; p.power.len()];
            freqs = p.freqs;
        }
        mean.iter_mut()
            .zip(&p.power)
            .for_each(|(m, v)| *m += v / seeds as f64);
    }
    let slope = log_log_slope(&freqs, &mean, 2.0, 35.0);
    assert!((-1.3..=-0.7).contains(&slope), "{slope}");
}

#[test]
fn pink_noise_is_seeded() {
    assert_eq!(
        gen_pink_noise(500, 100.0, 3).unwrap(),
        gen_pink_noise(500, 100.0, 3).unwrap()
    );
    assert_ne!(
        gen_pink_noise(500, 100.0, 3).unwrap(),
        gen_pink_noise(500, 100.0, 4).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bandpass_is_linear(
        x in prop::collection::vec(-5.0f64..5.0, 100..400),
        seed in any::<u64>(),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = x.iter().map(|_| rng.random_range(-5.0..5.0)).collect();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let fx = bandpass_filter(&x, 100.0, 1.0, 40.0).unwrap();
        let fy = bandpass_filter(&y, 100.0, 1.0, 40.0).unwrap();
        let fc = bandpass_filter(&combo, 100.0, 1.0, 40.0).unwrap();
        for i in 0..x.len() {
            let expect = a * fx[i] + b * fy[i];
            prop_assert!((fc[i] - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn snr_is_scale_invariant(
        clean in prop::collection::vec(-1.0f64..1.0, 32..200),
        gain in 0.01f64..100.0,
        seed in any::<u64>(),
    ) {
        prop_assume!(clean.iter().any(|v| v.abs() > 1e-3));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy: Vec<f64> = clean.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
        let s = compute_snr(&clean, &noisy).unwrap();
        let scaled = |v: &[f64]| v.iter().map(|x| x * gain).collect::<Vec<_>>();
        let s2 = compute_snr(&scaled(&clean), &scaled(&noisy)).unwrap();
        prop_assert!((s - s2).abs() < 1e-9);
    }
}

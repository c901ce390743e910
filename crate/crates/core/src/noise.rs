//! Synthetic corruption: 1/f noise, SNR arithmetic, SNR-targeted mixing,
//! inversion / time-reversal augmentation and white-noise occlusion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dsp::{mean, std_dev, SignalWindow, SosFilter, BANDPASS_ORDER};
use crate::error::{invalid, Error, Result};

/// Default target-SNR distribution, matched to recorded in-ear ECG.
pub const DEFAULT_SNR_MEAN_DB: f64 = -1.62;
pub const DEFAULT_SNR_STD_DB: f64 = 1.71;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseMixConfig {
    pub snr_mean: f64,
    pub snr_std: f64,
    pub band_low: f64,
    pub band_high: f64,
    pub seed: u64,
}

impl Default for NoiseMixConfig {
    fn default() -> Self {
        Self {
            snr_mean: DEFAULT_SNR_MEAN_DB,
            snr_std: DEFAULT_SNR_STD_DB,
            band_low: 1.0,
            band_high: 40.0,
            seed: 0,
        }
    }
}

impl NoiseMixConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.snr_std >= 0.0) || !self.snr_mean.is_finite() {
            return invalid("SNR std must be non-negative and the mean finite");
        }
        if !(0.0 < self.band_low && self.band_low < self.band_high) {
            return invalid("noise band must satisfy 0 < low < high");
        }
        Ok(())
    }
}

/// A clean window, its corrupted copy and the clean R-peak positions.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyCleanPair {
    pub clean: SignalWindow,
    pub noisy: SignalWindow,
    pub target_snr: f64,
    pub achieved_snr: f64,
    pub reference_peaks: Vec<usize>,
}

impl NoisyCleanPair {
    pub fn with_peaks(mut self, peaks: Vec<usize>) -> Self {
        self.reference_peaks = peaks;
        self
    }

    pub fn subject_id(&self) -> u32 {
        self.clean.subject_id
    }

    fn inverted(&self) -> Self {
        let flip = |w: &SignalWindow| w.with_samples(w.samples.iter().map(|v| -v).collect());
        Self {
            clean: flip(&self.clean),
            noisy: flip(&self.noisy),
            ..self.clone()
        }
    }

    fn reversed(&self) -> Self {
        let rev = |w: &SignalWindow| w.with_samples(w.samples.iter().rev().copied().collect());
        let last = self.clean.len() - 1;
        let mut peaks: Vec<usize> = self.reference_peaks.iter().map(|&i| last - i).collect();
        peaks.reverse();
        Self {
            clean: rev(&self.clean),
            noisy: rev(&self.noisy),
            reference_peaks: peaks,
            ..self.clone()
        }
    }
}

/// Zero-mean, unit-variance noise with a 1/f power spectrum, band-limited
/// to 1-40 Hz. Deterministic in `seed`.
pub fn gen_pink_noise(n: usize, fs: f64, seed: u64) -> Result<Vec<f64>> {
    gen_pink_noise_band(n, fs, 1.0, 40.0, seed)
}

/// [`gen_pink_noise`] with an explicit pass band.
pub fn gen_pink_noise_band(n: usize, fs: f64, low: f64, high: f64, seed: u64) -> Result<Vec<f64>> {
    if n < 16 {
        return invalid(format!("pink noise needs at least 16 samples, got {n}"));
    }
    let filter = SosFilter::butterworth_bandpass(BANDPASS_ORDER, low, high, fs)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut spec);
    // Amplitude ~ 1/sqrt(f) gives power ~ 1/f; bin k and n-k share a frequency.
    spec[0] = Complex64::new(0.0, 0.0);
    for (k, v) in spec.iter_mut().enumerate().skip(1) {
        *v /= (k.min(n - k) as f64).sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut spec);
    let raw: Vec<f64> = spec.iter().map(|c| c.re / n as f64).collect();

    let pad = filter.pad_len().min(n - 1);
    let mut x = filter.filtfilt_padded(&raw, pad)?;
    let m = mean(&x);
    x.iter_mut().for_each(|v| *v -= m);
    let s = std_dev(&x);
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    }
    Ok(x)
}

/// `10 log10( sum x^2 / sum (x - x~)^2 )` in dB.
pub fn compute_snr(clean: &[f64], noisy: &[f64]) -> Result<f64> {
    if clean.len() != noisy.len() {
        return Err(Error::Shape(format!(
            "clean has {} samples, noisy {}",
            clean.len(),
            noisy.len()
        )));
    }
    let signal: f64 = clean.iter().map(|v| v * v).sum();
    let residual: f64 = clean
        .iter()
        .zip(noisy)
        .map(|(c, n)| (c - n) * (c - n))
        .sum();
    if residual == 0.0 {
        return Err(Error::InfiniteSnr);
    }
    Ok(10.0 * (signal / residual).log10())
}

/// Adds `noise` scaled so that the result sits at exactly `target` dB.
pub fn mix_at_snr(clean: &SignalWindow, noise: &[f64], target: f64) -> Result<NoisyCleanPair> {
    if noise.len() != clean.len() {
        return Err(Error::Shape(format!(
            "noise has {} samples, window {}",
            noise.len(),
            clean.len()
        )));
    }
    let p_clean: f64 = clean.samples.iter().map(|v| v * v).sum();
    let p_noise: f64 = noise.iter().map(|v| v * v).sum();
    if !(p_clean > 0.0) || !(p_noise > 0.0) {
        return invalid("clean and noise must both have non-zero power");
    }
    if !target.is_finite() {
        return invalid("target SNR must be finite");
    }
    let alpha = (p_clean / (p_noise * 10f64.powf(target / 10.0))).sqrt();
    let noisy = clean.with_samples(
        clean
            .samples
            .iter()
            .zip(noise)
            .map(|(c, n)| c + alpha * n)
            .collect(),
    );
    let achieved_snr = compute_snr(&clean.samples, &noisy.samples)?;
    Ok(NoisyCleanPair {
        clean: clean.clone(),
        noisy,
        target_snr: target,
        achieved_snr,
        reference_peaks: Vec::new(),
    })
}

/// One draw from `Normal(snr_mean, snr_std^2)`.
pub fn sample_target_snr<R: Rng + ?Sized>(cfg: &NoiseMixConfig, rng: &mut R) -> f64 {
    if cfg.snr_std == 0.0 {
        return cfg.snr_mean;
    }
    Normal::new(cfg.snr_mean, cfg.snr_std)
        .expect("validated config")
        .sample(rng)
}

/// Returns the input pairs followed by `round(fraction * len)` transformed
/// copies. Each copy is a uniformly chosen original, either inverted in
/// amplitude or reversed in time with equal probability.
pub fn augment<R: Rng + ?Sized>(
    pairs: &[NoisyCleanPair],
    fraction: f64,
    rng: &mut R,
) -> Result<Vec<NoisyCleanPair>> {
    if !(0.0..=1.0).contains(&fraction) {
        return invalid(format!(
            "augmentation fraction must be in [0, 1], got {fraction}"
        ));
    }
    let extra = (fraction * pairs.len() as f64).round() as usize;
    let mut out = pairs.to_vec();
    out.reserve(extra);
    for _ in 0..extra {
        let src = &pairs[rng.random_range(0..pairs.len())];
        out.push(if rng.random_bool(0.5) {
            src.inverted()
        } else {
            src.reversed()
        });
    }
    Ok(out)
}

/// Replaces `[start_s, end_s)` with zero-mean white Gaussian noise whose
/// standard deviation matches the untouched samples (or the whole window
/// when nothing is left untouched).
pub fn occlude(w: &SignalWindow, start_s: f64, end_s: f64, seed: u64) -> Result<SignalWindow> {
    if !(0.0 <= start_s && start_s <= end_s && end_s <= w.duration() + 1e-9) {
        return invalid(format!(
            "occlusion [{start_s}, {end_s}) outside window of {} s",
            w.duration()
        ));
    }
    let start = ((start_s * w.fs).round() as usize).min(w.len());
    let end = ((end_s * w.fs).round() as usize).min(w.len());
    if start == end {
        return Ok(w.clone());
    }
    let rest: Vec<f64> = w.samples[..start]
        .iter()
        .chain(&w.samples[end..])
        .copied()
        .collect();
    let sigma = if rest.is_empty() {
        std_dev(&w.samples)
    } else {
        std_dev(&rest)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = w.samples.clone();
    for v in &mut out[start..end] {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v = sigma * z;
    }
    Ok(w.with_samples(out))
}

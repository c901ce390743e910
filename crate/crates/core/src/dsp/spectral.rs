//! Welch PSD and short-time spectrograms. These feed plotting exports only.

use std::f64::consts::PI;
use std::io::Write;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::mean;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    /// Bin centres in Hz, strictly increasing from 0.
    pub freqs: Vec<f64>,
    /// Power per Hz.
    pub power: Vec<f64>,
}

/// Power matrix indexed `[frequency][time]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub freqs: Vec<f64>,
    /// Segment centres in seconds.
    pub times: Vec<f64>,
    pub power: Vec<Vec<f64>>,
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

fn segment_len(seconds: f64, fs: f64) -> usize {
    (seconds * fs).round().max(0.0) as usize
}

fn hop_len(nseg: usize, overlap_frac: f64) -> usize {
    let overlap = (nseg as f64 * overlap_frac).round() as usize;
    (nseg - overlap.min(nseg - 1)).max(1)
}

/// One-sided periodogram magnitudes of every segment, Hann windowed.
fn stft_power(x: &[f64], nseg: usize, hop: usize, detrend: bool) -> Vec<Vec<f64>> {
    let window = hann(nseg);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nseg);
    let bins = nseg / 2 + 1;
    let count = (x.len() - nseg) / hop + 1;
    let mut buf = vec![Complex64::new(0.0, 0.0); nseg];
    (0..count)
        .map(|s| {
            let seg = &x[s * hop..s * hop + nseg];
            let offset = if detrend { mean(seg) } else { 0.0 };
            for (b, (v, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
                *b = Complex64::new((v - offset) * w, 0.0);
            }
            fft.process(&mut buf);
            buf[..bins].iter().map(|c| c.norm_sqr()).collect()
        })
        .collect()
}

/// Averaged modified periodogram with Hann segments of `seg_s` seconds.
/// Each segment has its mean removed before windowing.
pub fn welch_psd(x: &[f64], fs: f64, seg_s: f64, overlap_frac: f64) -> Result<PsdEstimate> {
    let nseg = segment_len(seg_s, fs);
    if nseg < 2 {
        return invalid("Welch segment must span at least two samples");
    }
    if nseg > x.len() {
        return invalid(format!(
            "segment of {nseg} samples is longer than the {}-sample signal",
            x.len()
        ));
    }
    if !(0.0..1.0).contains(&overlap_frac) {
        return invalid("overlap must be in [0, 1)");
    }
    let hop = hop_len(nseg, overlap_frac);
    let window_power: f64 = hann(nseg).iter().map(|w| w * w).sum();
    let frames = stft_power(x, nseg, hop, true);
    let bins = nseg / 2 + 1;
    let scale = 1.0 / (fs * window_power * frames.len() as f64);
    let power = (0..bins)
        .map(|k| {
            let onesided = if k == 0 || (nseg.is_multiple_of(2) && k == bins - 1) {
                1.0
            } else {
                2.0
            };
            frames.iter().map(|f| f[k]).sum::<f64>() * scale * onesided
        })
        .collect();
    let freqs = (0..bins).map(|k| k as f64 * fs / nseg as f64).collect();
    Ok(PsdEstimate { freqs, power })
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-radius..=radius)
        .map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.into_iter().map(|v| v / total).collect()
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * n;
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

fn convolve_reflect(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    let radius = (kernel.len() / 2) as isize;
    (0..x.len())
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * x[reflect(i as isize + k as isize - radius, x.len())])
                .sum()
        })
        .collect()
}

/// Separable Gaussian blur over both matrix axes with reflected edges.
/// `sigma <= 0` returns the input unchanged.
pub fn gaussian_smooth(m: &[Vec<f64>], sigma: f64) -> Vec<Vec<f64>> {
    if sigma <= 0.0 || m.is_empty() {
        return m.to_vec();
    }
    let kernel = gaussian_kernel(sigma);
    let rows: Vec<Vec<f64>> = m.iter().map(|r| convolve_reflect(r, &kernel)).collect();
    let cols = rows[0].len();
    let mut out = vec![vec![0.0; cols]; rows.len()];
    for c in 0..cols {
        let column: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        for (r, v) in convolve_reflect(&column, &kernel).into_iter().enumerate() {
            out[r][c] = v;
        }
    }
    out
}

/// Hann-windowed short-time power, optionally Gaussian smoothed
/// (`smooth_sigma` in bins, applied along both axes).
pub fn spectrogram(
    x: &[f64],
    fs: f64,
    win_s: f64,
    overlap_frac: f64,
    smooth_sigma: f64,
) -> Result<Spectrogram> {
    let nseg = segment_len(win_s, fs);
    if nseg < 2 {
        return invalid("spectrogram window must span at least two samples");
    }
    if nseg > x.len() {
        return invalid("spectrogram window longer than signal");
    }
    if !(0.0..1.0).contains(&overlap_frac) {
        return invalid("overlap must be in [0, 1)");
    }
    let hop = hop_len(nseg, overlap_frac);
    let frames = stft_power(x, nseg, hop, false);
    let bins = nseg / 2 + 1;
    let power: Vec<Vec<f64>> = (0..bins)
        .map(|k| frames.iter().map(|f| f[k]).collect())
        .collect();
    let times = (0..frames.len())
        .map(|s| (s * hop) as f64 / fs + nseg as f64 / (2.0 * fs))
        .collect();
    let freqs = (0..bins).map(|k| k as f64 * fs / nseg as f64).collect();
    Ok(Spectrogram {
        freqs,
        times,
        power: gaussian_smooth(&power, smooth_sigma),
    })
}

/// Writes `freq_hz,<name>,...` with one row per frequency bin.
pub fn write_psd_csv<W: Write>(
    out: &mut W,
    freqs: &[f64],
    columns: &[(&str, &[f64])],
) -> Result<()> {
    write!(out, "freq_hz")?;
    for (name, _) in columns {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for (k, f) in freqs.iter().enumerate() {
        write!(out, "{f}")?;
        for (_, col) in columns {
            write!(out, ",{}", col[k])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Header `freq_hz,<t0>,<t1>,...`; one row per frequency.
pub fn write_spectrogram_csv<W: Write>(out: &mut W, s: &Spectrogram) -> Result<()> {
    write!(out, "freq_hz")?;
    for t in &s.times {
        write!(out, ",{t}")?;
    }
    writeln!(out)?;
    for (f, row) in s.freqs.iter().zip(&s.power) {
        write!(out, "{f}")?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn tone(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
            .collect()
    }

    fn argmax(v: &[f64]) -> usize {
        (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()
    }

    #[test]
    fn welch_pure_tone() {
        let p = welch_psd(&tone(10.0, 100.0, 1000), 100.0, 2.0, 0.5).unwrap();
        assert_eq!(p.freqs.len(), 101);
        assert!((p.freqs[1] - 0.5).abs() < 1e-12);
        let k = argmax(&p.power);
        assert_eq!(p.freqs[k], 10.0);
        for (f, v) in p.freqs.iter().zip(&p.power) {
            if (f - 10.0).abs() > 2.0 {
                assert!(10.0 * (p.power[k] / v.max(1e-300)).log10() >= 20.0, "{f}");
            }
        }
        assert!(p.freqs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn welch_tone_power_integrates_to_variance() {
        let p = welch_psd(&tone(10.0, 100.0, 4000), 100.0, 2.0, 0.5).unwrap();
        let df = p.freqs[1];
        let total: f64 = p.power.iter().sum::<f64>() * df;
        assert!((total - 0.5).abs() < 0.01, "{total}");
    }

    #[test]
    fn welch_white_noise_is_flat() {
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // 100 half-overlapping 200-sample segments.
            let x: Vec<f64> = (0..10_100)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let p = welch_psd(&x, 100.0, 2.0, 0.5).unwrap();
            let inner = &p.power[1..p.power.len() - 1];
            let level = inner.iter().sum::<f64>() / inner.len() as f64;
            // Unit-variance white noise: 2 * sigma^2 / fs per Hz, one-sided.
            assert!((level - 0.02).abs() < 0.002, "{level}");
            for v in inner {
                assert!((10.0 * (v / level).log10()).abs() < 3.0);
            }
        }
    }

    #[test]
    fn welch_zero_and_errors() {
        let p = welch_psd(&[0.0; 500], 100.0, 2.0, 0.5).unwrap();
        assert!(p.power.iter().all(|&v| v == 0.0));
        assert!(welch_psd(&[0.0; 100], 100.0, 2.0, 0.5).is_err());
    }

    #[test]
    fn spectrogram_tracks_tone() {
        let s = spectrogram(&tone(10.0, 100.0, 1000), 100.0, 0.1, 0.5, 0.0).unwrap();
        assert_eq!(s.freqs.len(), 6);
        assert_eq!(s.times.len(), (1000 - 10) / 5 + 1);
        for t in 0..s.times.len() {
            let col: Vec<f64> = s.power.iter().map(|r| r[t]).collect();
            assert_eq!(s.freqs[argmax(&col)], 10.0);
        }
    }

    #[test]
    fn spectrogram_sees_frequency_switch() {
        let mut x = tone(5.0, 100.0, 1000);
        x.extend(tone(20.0, 100.0, 1000));
        let s = spectrogram(&x, 100.0, 0.4, 0.5, 0.0).unwrap();
        let dom = |t: usize| {
            let col: Vec<f64> = s.power.iter().map(|r| r[t]).collect();
            s.freqs[argmax(&col)]
        };
        let n = s.times.len();
        assert_eq!(dom(2), 5.0);
        assert_eq!(dom(n - 3), 20.0);
    }

    #[test]
    fn zero_sigma_is_identity() {
        let x = tone(7.0, 100.0, 500);
        let a = spectrogram(&x, 100.0, 0.1, 0.5, 0.0).unwrap();
        let m = a.power.clone();
        assert_eq!(gaussian_smooth(&m, 0.0), m);
        let b = spectrogram(&x, 100.0, 0.1, 0.5, 1.5).unwrap();
        assert_ne!(a.power, b.power);
        // Smoothing preserves total energy away from nothing; reflect edges keep mass.
        let sa: f64 = a.power.iter().flatten().sum();
        let sb: f64 = b.power.iter().flatten().sum();
        assert!((sa - sb).abs() / sa < 1e-9);
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_psd_csv(
            &mut buf,
            &[0.0, 0.5],
            &[("clean", &[1.0, 2.0]), ("noisy", &[3.0, 4.5])],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "freq_hz,clean,noisy\n0,1,3\n0.5,2,4.5\n"
        );
    }
}

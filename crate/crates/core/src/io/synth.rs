//! Gaussian-bump synthetic ECG with exact R-peak ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::eval::PeakSet;
use crate::seed::derive_seed;

/// One wave of a beat, positioned relative to the R peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub offset_s: f64,
    pub width_s: f64,
    pub amplitude: f64,
}

impl Wave {
    pub const fn new(offset_s: f64, width_s: f64, amplitude: f64) -> Self {
        Self {
            offset_s,
            width_s,
            amplitude,
        }
    }
}

/// P, Q, R, S, T of a normal beat.
pub const DEFAULT_WAVES: [Wave; 5] = [
    Wave::new(-0.20, 0.025, 0.15),
    Wave::new(-0.025, 0.010, -0.10),
    Wave::new(0.0, 0.012, 1.00),
    Wave::new(0.025, 0.010, -0.20),
    Wave::new(0.30, 0.060, 0.30),
];

/// Wide, tall ventricular beat without P or T.
pub const PVC_WAVES: [Wave; 3] = [
    Wave::new(-0.04, 0.020, -0.15),
    Wave::new(0.0, 0.030, 1.40),
    Wave::new(0.07, 0.040, -0.45),
];

/// Every `PVC_EVERY`-th beat of a pvc-like record is ectopic.
pub const PVC_EVERY: usize = 5;
/// Fraction of the mean R-R by which an ectopic beat comes early.
const PVC_PREMATURITY: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Morphology {
    Normal,
    PvcLike,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEcgSpec {
    pub duration_s: f64,
    pub fs: f64,
    pub hr_bpm: f64,
    /// Standard deviation of each R-R interval as a fraction of the mean.
    pub rr_jitter: f64,
    pub waves: Vec<Wave>,
    pub morphology: Morphology,
    pub seed: u64,
}

impl Default for SyntheticEcgSpec {
    fn default() -> Self {
        Self {
            duration_s: 10.0,
            fs: 100.0,
            hr_bpm: 60.0,
            rr_jitter: 0.0,
            waves: DEFAULT_WAVES.to_vec(),
            morphology: Morphology::Normal,
            seed: 0,
        }
    }
}

impl SyntheticEcgSpec {
    fn validate(&self) -> Result<()> {
        if !(self.fs > 0.0 && self.hr_bpm > 0.0 && self.duration_s > 0.0) {
            return invalid("duration, fs and heart rate must be positive");
        }
        if !(0.0..0.5).contains(&self.rr_jitter) {
            return invalid(format!(
                "R-R jitter must be in [0, 0.5), got {}",
                self.rr_jitter
            ));
        }
        if self.waves.is_empty() || self.waves.iter().any(|w| !(w.width_s > 0.0)) {
            return invalid("waves must be non-empty with positive widths");
        }
        if self.duration_s < 60.0 / self.hr_bpm {
            return invalid("duration shorter than one R-R interval");
        }
        Ok(())
    }
}

fn add_beat(x: &mut [f64], fs: f64, r: f64, waves: &[Wave]) {
    for w in waves {
        let centre = r + w.offset_s * fs;
        let sigma = w.width_s * fs;
        let reach = (5.0 * sigma).ceil();
        let lo = (centre - reach).max(0.0) as usize;
        let hi = ((centre + reach) as usize + 1).min(x.len());
        for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
            let d = (i as f64 - centre) / sigma;
            *v += w.amplitude * (-0.5 * d * d).exp();
        }
    }
}

/// Sum of Gaussian bumps per beat. The first R peak sits half an R-R
/// interval in; beat times are rounded to the sample grid, so the returned
/// peaks are exact.
pub fn synth_ecg(spec: &SyntheticEcgSpec) -> Result<(Vec<f64>, PeakSet)> {
    spec.validate()?;
    let n = (spec.duration_s * spec.fs).round() as usize;
    let rr = 60.0 / spec.hr_bpm;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x = vec![0.0; n];
    let mut peaks = Vec::new();
    let mut t = rr / 2.0;
    let mut beat = 0usize;
    loop {
        let ectopic = spec.morphology == Morphology::PvcLike && beat % PVC_EVERY == PVC_EVERY - 1;
        let at = if ectopic { t - PVC_PREMATURITY * rr } else { t };
        let idx = (at * spec.fs).round();
        if idx >= n as f64 {
            break;
        }
        let waves: &[Wave] = if ectopic { &PVC_WAVES } else { &spec.waves };
        add_beat(&mut x, spec.fs, idx, waves);
        peaks.push(idx as usize);
        let z: f64 = StandardNormal.sample(&mut rng);
        t += rr * (1.0 + spec.rr_jitter * z).max(0.5);
        beat += 1;
    }
    Ok((x, PeakSet::new(peaks, spec.fs)))
}

/// Per-subject randomized spec: heart rate, R-R jitter, wave amplitudes
/// and widths, and a one-in-five chance of pvc-like morphology.
pub fn subject_spec(subject: u32, base_seed: u64, duration_s: f64, fs: f64) -> SyntheticEcgSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base_seed, "subject", u64::from(subject)));
    let waves = DEFAULT_WAVES
        .iter()
        .map(|w| Wave {
            offset_s: w.offset_s * rng.random_range(0.9..1.1),
            width_s: w.width_s * rng.random_range(0.85..1.15),
            amplitude: w.amplitude * rng.random_range(0.8..1.2),
        })
        .collect();
    SyntheticEcgSpec {
        duration_s,
        fs,
        hr_bpm: rng.random_range(50.0..100.0),
        rr_jitter: rng.random_range(0.0..0.05),
        waves,
        morphology: if rng.random_bool(0.2) {
            Morphology::PvcLike
        } else {
            Morphology::Normal
        },
        seed: rng.random(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_rhythm() {
        let (x, p) = synth_ecg(&SyntheticEcgSpec::default()).unwrap();
        assert_eq!(x.len(), 1000);
        assert_eq!(p.len(), 10);
        for w in p.indices.windows(2) {
            assert!((99..=101).contains(&(w[1] - w[0])));
        }
    }

    #[test]
    fn amplitude_linearity() {
        let spec = SyntheticEcgSpec {
            rr_jitter: 0.05,
            seed: 4,
            ..Default::default()
        };
        let double = SyntheticEcgSpec {
            waves: spec
                .waves
                .iter()
                .map(|w| Wave {
                    amplitude: 2.0 * w.amplitude,
                    ..*w
                })
                .collect(),
            ..spec.clone()
        };
        let (a, pa) = synth_ecg(&spec).unwrap();
        let (b, pb) = synth_ecg(&double).unwrap();
        assert_eq!(pa, pb);
        for (u, v) in a.iter().zip(&b) {
            assert_eq!(2.0 * u, *v);
        }
    }

    #[test]
    fn peaks_are_beat_maxima() {
        for seed in 0..20 {
            let spec = SyntheticEcgSpec {
                hr_bpm: 50.0 + 4.0 * seed as f64,
                rr_jitter: 0.05,
                seed,
                ..Default::default()
            };
            let (x, p) = synth_ecg(&spec).unwrap();
            for &r in &p.indices {
                let lo = r.saturating_sub(15);
                let hi = (r + 16).min(x.len());
                let m = x[lo..hi].iter().cloned().fold(f64::MIN, f64::max);
                assert_eq!(x[r], m);
            }
        }
    }

    #[test]
    fn pvc_beats_are_early() {
        let spec = SyntheticEcgSpec {
            morphology: Morphology::PvcLike,
            ..Default::default()
        };
        let (_, p) = synth_ecg(&spec).unwrap();
        let gaps: Vec<usize> = p.indices.windows(2).map(|w| w[1] - w[0]).collect();
        assert_eq!(gaps[3], 70);
        assert_eq!(gaps[4], 130);
    }

    #[test]
    fn invalid_specs() {
        let short = SyntheticEcgSpec {
            duration_s: 0.5,
            ..Default::default()
        };
        assert!(synth_ecg(&short).is_err());
        let mut flat = SyntheticEcgSpec::default();
        flat.waves[0].width_s = 0.0;
        assert!(synth_ecg(&flat).is_err());
    }
}

//! Clean records to noisy/clean training pairs: resample, band-pass,
//! window, normalize, then mix 1/f noise at a sampled target SNR.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dsp::{bandpass_filter, normalize, resample, segment, SignalWindow};
use crate::error::{invalid, Error, Result};
use crate::eval::{
    extract_template, mfht_detect, PeakSet, Template, TEMPLATE_POST_S, TEMPLATE_PRE_S,
};
use crate::io::{subject_spec, synth_ecg, SyntheticEcgSpec};
use crate::noise::{
    gen_pink_noise_band, mix_at_snr, sample_target_snr, NoiseMixConfig, NoisyCleanPair,
};
use crate::seed::derive_seed;

/// One subject's clean single-lead recording.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanRecord {
    pub subject: u32,
    pub signal: Vec<f64>,
    pub fs: f64,
    /// Ground-truth R peaks when known.
    pub peaks: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusConfig {
    pub fs: f64,
    pub window_s: f64,
    pub overlap: f64,
    pub band_low: f64,
    pub band_high: f64,
    pub mix: NoiseMixConfig,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            fs: 100.0,
            window_s: 10.0,
            overlap: 0.9,
            band_low: 1.0,
            band_high: 40.0,
            mix: NoiseMixConfig::default(),
        }
    }
}

/// Randomized synthetic subjects `first .. first + count`.
pub fn synthetic_records(
    first: u32,
    count: u32,
    duration_s: f64,
    fs: f64,
    seed: u64,
) -> Result<Vec<CleanRecord>> {
    (first..first + count)
        .map(|subject| {
            let spec = subject_spec(subject, seed, duration_s, fs);
            let (signal, peaks) = synth_ecg(&spec)?;
            Ok(CleanRecord {
                subject,
                signal,
                fs,
                peaks: Some(peaks.indices),
            })
        })
        .collect()
}

/// Template of the default synthetic beat after the same preprocessing,
/// used to locate reference peaks in recordings without annotations.
pub fn reference_template(cfg: &CorpusConfig) -> Result<Template> {
    let spec = SyntheticEcgSpec {
        duration_s: cfg.window_s,
        fs: cfg.fs,
        ..Default::default()
    };
    let (x, peaks) = synth_ecg(&spec)?;
    let filtered = bandpass_filter(&x, cfg.fs, cfg.band_low, cfg.band_high)?;
    let w = normalize(&SignalWindow::new(filtered, cfg.fs, 0)?)?;
    extract_template(&[w], &[peaks], TEMPLATE_PRE_S, TEMPLATE_POST_S)
}

struct CleanWindow {
    window: SignalWindow,
    peaks: Vec<usize>,
}

fn record_windows(
    rec: &CleanRecord,
    cfg: &CorpusConfig,
    template: Option<&Template>,
) -> Result<Vec<CleanWindow>> {
    let signal = resample(&rec.signal, rec.fs, cfg.fs)?;
    let factor = rec.fs / cfg.fs;
    let filtered = bandpass_filter(&signal, cfg.fs, cfg.band_low, cfg.band_high)?;
    let windows = segment(&filtered, cfg.fs, cfg.window_s, cfg.overlap, rec.subject)?;
    let hop = (cfg.window_s * (1.0 - cfg.overlap) * cfg.fs).round() as usize;
    let peaks: Option<Vec<usize>> = rec.peaks.as_ref().map(|p| {
        p.iter()
            .map(|&i| (i as f64 / factor).round() as usize)
            .collect()
    });
    let mut out = Vec::with_capacity(windows.len());
    for (k, w) in windows.into_iter().enumerate() {
        let w = match normalize(&w) {
            Ok(w) => w,
            Err(Error::DegenerateWindow) => continue,
            Err(e) => return Err(e),
        };
        let start = k * hop;
        let end = start + w.len();
        let in_window = match (&peaks, template) {
            (Some(p), _) => p
                .iter()
                .filter(|&&i| (start..end).contains(&i))
                .map(|&i| i - start)
                .collect(),
            (None, Some(t)) => mfht_detect(&w, t)?.indices,
            (None, None) => Vec::new(),
        };
        out.push(CleanWindow {
            window: w,
            peaks: in_window,
        });
    }
    Ok(out)
}

/// Windows every record and corrupts each window with its own noise and
/// target SNR. Pair `i` draws from seeds derived from `(mix.seed, i)`, so
/// output is independent of thread count.
pub fn build_pairs(records: &[CleanRecord], cfg: &CorpusConfig) -> Result<Vec<NoisyCleanPair>> {
    cfg.mix.validate()?;
    if !(cfg.fs > 0.0) {
        return invalid("target sampling rate must be positive");
    }
    let template = if records.iter().any(|r| r.peaks.is_none()) {
        Some(reference_template(cfg)?)
    } else {
        None
    };
    let per_record = records
        .par_iter()
        .map(|r| record_windows(r, cfg, template.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let clean: Vec<CleanWindow> = per_record.into_iter().flatten().collect();
    clean
        .par_iter()
        .enumerate()
        .map(|(i, cw)| {
            let i = i as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.mix.seed, "snr", i));
            let target = sample_target_snr(&cfg.mix, &mut rng);
            let noise = gen_pink_noise_band(
                cw.window.len(),
                cfg.fs,
                cfg.mix.band_low,
                cfg.mix.band_high,
                derive_seed(cfg.mix.seed, "noise", i),
            )?;
            Ok(mix_at_snr(&cw.window, &noise, target)?.with_peaks(cw.peaks.clone()))
        })
        .collect()
}

/// Peak sets of the clean windows, for templates and references.
pub fn reference_peaks(pairs: &[NoisyCleanPair]) -> Vec<PeakSet> {
    pairs
        .iter()
        .map(|p| PeakSet::new(p.reference_peaks.clone(), p.clean.fs))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_corpus_shapes() {
        let recs = synthetic_records(0, 2, 20.0, 100.0, 1).unwrap();
        let cfg = CorpusConfig::default();
        let pairs = build_pairs(&recs, &cfg).unwrap();
        assert_eq!(pairs.len(), 22);
        for p in &pairs {
            assert_eq!(p.clean.len(), 1000);
            assert!((p.achieved_snr - p.target_snr).abs() < 1e-6);
            assert!(p.reference_peaks.len() >= 7);
        }
        assert_eq!(build_pairs(&recs, &cfg).unwrap(), pairs);
    }

    #[test]
    fn unannotated_records_get_detected_peaks() {
        let mut recs = synthetic_records(0, 1, 20.0, 100.0, 1).unwrap();
        let truth = build_pairs(&recs, &CorpusConfig::default()).unwrap();
        recs[0].peaks = None;
        let detected = build_pairs(&recs, &CorpusConfig::default()).unwrap();
        let agree = truth
            .iter()
            .zip(&detected)
            .filter(|(a, b)| {
                let ra = PeakSet::new(a.reference_peaks.clone(), 100.0);
                let rb = PeakSet::new(b.reference_peaks.clone(), 100.0);
                crate::eval::r_peak_precision(&rb, &ra, 0.06) == 1.0
            })
            .count();
        assert!(agree * 10 >= truth.len() * 9, "{agree}/{}", truth.len());
    }

    #[test]
    fn resampled_input() {
        let spec = SyntheticEcgSpec {
            duration_s: 12.0,
            fs: 500.0,
            ..Default::default()
        };
        let (x, p) = synth_ecg(&spec).unwrap();
        let rec = CleanRecord {
            subject: 3,
            signal: x,
            fs: 500.0,
            peaks: Some(p.indices),
        };
        let pairs = build_pairs(&[rec], &CorpusConfig::default()).unwrap();
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[0].reference_peaks[0], 50);
    }
}

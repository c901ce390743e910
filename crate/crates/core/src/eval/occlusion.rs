//! White-noise occlusion probes: blank part of one beat in the noisy
//! input and compare the reconstruction with and without the blanking.

use super::Denoiser;
use crate::dsp::SignalWindow;
use crate::error::Result;
use crate::noise::{occlude, NoisyCleanPair};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Occlude the T wave, measure the T wave.
    TWave,
    /// Occlude P through QRS, measure the QRS.
    PQrs,
}

impl Region {
    /// Occluded span relative to the R peak, seconds.
    pub fn occluded(self) -> (f64, f64) {
        match self {
            Region::TWave => (0.15, 0.45),
            Region::PQrs => (-0.28, 0.06),
        }
    }

    /// Span whose maximum is reported as the wave amplitude.
    pub fn measured(self) -> (f64, f64) {
        match self {
            Region::TWave => (0.15, 0.45),
            Region::PQrs => (-0.05, 0.05),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::TWave => "t-wave",
            Region::PQrs => "p-qrs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionRow {
    pub index: usize,
    pub subject: u32,
    pub r_peak: usize,
    pub amplitude: f64,
    pub occluded_amplitude: f64,
    /// `occluded_amplitude / amplitude`; NaN when the reference amplitude
    /// is not positive.
    pub ratio: f64,
}

/// First reference peak whose whole occlusion and measurement spans fit
/// in the window.
pub fn first_full_beat(peaks: &[usize], len: usize, fs: f64, region: Region) -> Option<usize> {
    let (o0, o1) = region.occluded();
    let (m0, m1) = region.measured();
    let before = (-o0.min(m0) * fs).ceil().max(0.0) as usize;
    let after = (o1.max(m1) * fs).ceil() as usize;
    peaks
        .iter()
        .copied()
        .find(|&r| r >= before && r + after <= len)
}

fn span_max(w: &SignalWindow, r: usize, span: (f64, f64)) -> f64 {
    let at = |s: f64| ((r as f64 + s * w.fs).round().max(0.0) as usize).min(w.len());
    w.samples[at(span.0)..at(span.1)]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Probes up to `max_windows` pairs that contain a full beat.
pub fn occlusion_probe<D: Denoiser + ?Sized>(
    denoiser: &D,
    pairs: &[NoisyCleanPair],
    region: Region,
    max_windows: usize,
    seed: u64,
) -> Result<Vec<OcclusionRow>> {
    let mut chosen = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        if chosen.len() == max_windows {
            break;
        }
        if let Some(r) = first_full_beat(&p.reference_peaks, p.noisy.len(), p.noisy.fs, region) {
            chosen.push((i, r));
        }
    }
    let mut inputs: Vec<SignalWindow> = Vec::with_capacity(2 * chosen.len());
    for &(i, r) in &chosen {
        let w = &pairs[i].noisy;
        let (a, b) = region.occluded();
        let t = r as f64 / w.fs;
        let occluded = occlude(w, t + a, t + b, derive_seed(seed, "occlude", i as u64))?;
        inputs.push(w.clone());
        inputs.push(occluded);
    }
    let refs: Vec<&SignalWindow> = inputs.iter().collect();
    let out = denoiser.denoise_all(&refs)?;
    Ok(chosen
        .iter()
        .enumerate()
        .map(|(k, &(i, r))| {
            let amplitude = span_max(&out[2 * k], r, region.measured());
            let occluded_amplitude = span_max(&out[2 * k + 1], r, region.measured());
            let ratio = if amplitude > 0.0 {
                occluded_amplitude / amplitude
            } else {
                f64::NAN
            };
            OcclusionRow {
                index: i,
                subject: pairs[i].subject_id(),
                r_peak: r,
                amplitude,
                occluded_amplitude,
                ratio,
            }
        })
        .collect())
}

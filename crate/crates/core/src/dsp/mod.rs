//! Deterministic signal-processing kernels.
//!
//! Everything here is a pure function of its inputs: zero-phase Butterworth
//! band-pass filtering, integer decimation, windowing and normalization,
//! the FFT analytic-signal envelope, zero-padded cross-correlation, and the
//! Welch / spectrogram diagnostics used for plotting exports.

mod correlate;
mod filter;
mod hilbert;
mod resample;
mod spectral;
mod window;

pub use correlate::cross_correlate;
pub use filter::{bandpass_filter, Biquad, SosFilter, BANDPASS_ORDER};
pub use hilbert::{analytic_envelope, analytic_signal};
pub use resample::{kaiser_lowpass, resample};
pub use spectral::{
    gaussian_smooth, spectrogram, welch_psd, write_psd_csv, write_spectrogram_csv, PsdEstimate,
    Spectrogram,
};
pub use window::{normalize, segment};

use crate::error::{invalid, Result};

/// A fixed-length run of real samples at a known sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalWindow {
    pub samples: Vec<f64>,
    /// Sampling rate in Hz.
    pub fs: f64,
    pub subject_id: u32,
}

impl SignalWindow {
    pub fn new(samples: Vec<f64>, fs: f64, subject_id: u32) -> Result<Self> {
        if samples.is_empty() {
            return invalid("signal window must not be empty");
        }
        if !(fs > 0.0 && fs.is_finite()) {
            return invalid(format!("sampling rate must be positive, got {fs}"));
        }
        Ok(Self {
            samples,
            fs,
            subject_id,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Window duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    /// Same metadata, different samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            fs: self.fs,
            subject_id: self.subject_id,
        }
    }
}

/// Multi-channel recording as ingested, before windowing.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub channels: Vec<Vec<f64>>,
    pub fs: f64,
    pub names: Vec<String>,
}

impl RawRecord {
    pub fn new(channels: Vec<Vec<f64>>, fs: f64, names: Vec<String>) -> Result<Self> {
        if channels.len() != names.len() {
            return invalid("channel and name counts differ");
        }
        if let Some(first) = channels.first() {
            if channels.iter().any(|c| c.len() != first.len()) {
                return invalid("all channels must have equal length");
            }
        }
        if !(fs > 0.0) {
            return invalid("sampling rate must be positive");
        }
        Ok(Self {
            channels,
            fs,
            names,
        })
    }

    pub fn channel_by_name(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.channels[i].as_slice())
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
pub(crate) fn std_dev(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_rejects_empty_and_bad_rate() {
        assert!(SignalWindow::new(vec![], 100.0, 0).is_err());
        assert!(SignalWindow::new(vec![1.0], 0.0, 0).is_err());
        assert!(SignalWindow::new(vec![1.0], f64::NAN, 0).is_err());
        let w = SignalWindow::new(vec![0.0; 1000], 100.0, 3).unwrap();
        assert_eq!(w.duration(), 10.0);
    }

    #[test]
    fn raw_record_requires_equal_lengths() {
        let r = RawRecord::new(
            vec![vec![0.0; 3], vec![0.0; 4]],
            100.0,
            vec!["a".into(), "b".into()],
        );
        assert!(r.is_err());
        let r = RawRecord::new(
            vec![vec![1.0; 3], vec![2.0; 3]],
            100.0,
            vec!["I".into(), "II".into()],
        )
        .unwrap();
        assert_eq!(r.channel_by_name("II").unwrap(), &[2.0, 2.0, 2.0]);
    }
}

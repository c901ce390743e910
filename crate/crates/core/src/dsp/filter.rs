//! Butterworth band-pass design as second-order sections, applied
//! forward and backward for zero phase.

use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Prototype order of the preprocessing band-pass. The resulting band-pass
/// transfer function has twice this order.
pub const BANDPASS_ORDER: usize = 4;

/// One second-order section, `a[0]` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z2 * self.b[2];
        let den = self.a[0] + z_inv * self.a[1] + z2 * self.a[2];
        num / den
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }

    /// Transposed direct-form II state after settling on a unit step.
    fn step_state(&self) -> [f64; 2] {
        let y = self.dc_gain();
        [y - self.b[0], self.b[2] - self.a[2] * y]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    /// Digital Butterworth band-pass of prototype order `order` (even),
    /// designed through the bilinear transform with pre-warped edges.
    pub fn butterworth_bandpass(order: usize, low: f64, high: f64, fs: f64) -> Result<Self> {
        if order == 0 || !order.is_multiple_of(2) {
            return invalid(format!(
                "band-pass prototype order must be even, got {order}"
            ));
        }
        if !(fs > 0.0) || !(0.0 < low && low < high && high < fs / 2.0) {
            return invalid(format!(
                "band edges must satisfy 0 < low < high < fs/2 (low={low}, high={high}, fs={fs})"
            ));
        }
        let k = 2.0 * fs;
        let wl = k * (PI * low / fs).tan();
        let wh = k * (PI * high / fs).tan();
        let bw = wh - wl;
        let w0 = (wl * wh).sqrt();

        let mut sections = Vec::with_capacity(order);
        // Upper-half-plane prototype poles; each conjugate partner yields the
        // conjugate band-pass poles, so one biquad per band-pass pole here.
        for m in 0..order / 2 {
            let theta = PI * (2 * m + 1 + order) as f64 / (2 * order) as f64;
            let proto = Complex64::from_polar(1.0, theta);
            let half = proto * (bw / 2.0);
            let disc = (half * half - w0 * w0).sqrt();
            for s in [half + disc, half - disc] {
                let z = (k + s) / (k - s);
                sections.push(Biquad {
                    b: [1.0, 0.0, -1.0],
                    a: [1.0, -2.0 * z.re, z.norm_sqr()],
                });
            }
        }

        let mut filter = Self { sections };
        // Unit gain at the digital image of the analog centre frequency.
        let fc = fs / PI * (w0 / k).atan();
        let g = filter.response(fc, fs).norm();
        let per_section = g.powf(-1.0 / filter.sections.len() as f64);
        for s in &mut filter.sections {
            for b in &mut s.b {
                *b *= per_section;
            }
        }
        Ok(filter)
    }

    /// Order of the full transfer function.
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    /// Edge padding used by [`SosFilter::filtfilt`].
    pub fn pad_len(&self) -> usize {
        3 * self.order()
    }

    /// Complex frequency response at `freq` Hz.
    pub fn response(&self, freq: f64, fs: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq / fs);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    /// Magnitude response of the forward-backward application, `|H(f)|^2`.
    pub fn zero_phase_gain(&self, freq: f64, fs: f64) -> f64 {
        self.response(freq, fs).norm_sqr()
    }

    fn initial_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let zi = s.step_state();
                let out = [zi[0] * scale, zi[1] * scale];
                scale *= s.dc_gain();
                out
            })
            .collect()
    }

    /// Causal cascade, starting every section from its steady state for a
    /// constant input of `x[0]`.
    fn run(&self, x: &[f64], zi: &[[f64; 2]]) -> Vec<f64> {
        let mut y = x.to_vec();
        // zi already carry the upstream DC gains, so every section scales
        // by the cascade input.
        let x0 = x.first().copied().unwrap_or(0.0);
        for (s, z) in self.sections.iter().zip(zi) {
            let mut z1 = z[0] * x0;
            let mut z2 = z[1] * x0;
            for v in y.iter_mut() {
                let input = *v;
                let out = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[1] * out + z2;
                z2 = s.b[2] * input - s.a[2] * out;
                *v = out;
            }
        }
        y
    }

    /// Zero-phase forward-backward filtering with odd reflection padding.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.filtfilt_padded(x, self.pad_len())
    }

    /// [`SosFilter::filtfilt`] with an explicit padding length (`pad < x.len()`).
    pub fn filtfilt_padded(&self, x: &[f64], pad: usize) -> Result<Vec<f64>> {
        let n = x.len();
        if n <= pad {
            return invalid(format!(
                "input of {n} samples is too short for {pad} samples of edge padding"
            ));
        }
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.initial_states();
        let mut y = self.run(&ext, &zi);
        y.reverse();
        let mut y = self.run(&y, &zi);
        y.reverse();
        Ok(y[pad..pad + n].to_vec())
    }
}

/// Zero-phase Butterworth band-pass between `low` and `high` Hz.
pub fn bandpass_filter(x: &[f64], fs: f64, low: f64, high: f64) -> Result<Vec<f64>> {
    SosFilter::butterworth_bandpass(BANDPASS_ORDER, low, high, fs)?.filtfilt(x)
}

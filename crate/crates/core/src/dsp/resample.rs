use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Stopband attenuation of the anti-alias filter, in dB.
const STOPBAND_DB: f64 = 60.0;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Windowed-sinc low-pass with a Kaiser window.
///
/// `cutoff` is the half-amplitude frequency and `transition` the full
/// transition width, both in Hz. The tap count is always odd so the filter
/// can be applied centred without a fractional delay.
pub fn kaiser_lowpass(cutoff: f64, transition: f64, atten_db: f64, fs: f64) -> Vec<f64> {
    let beta = if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    };
    let dw = 2.0 * PI * transition / fs;
    let mut taps = ((atten_db - 8.0) / (2.285 * dw)).ceil() as usize + 1;
    if taps.is_multiple_of(2) {
        taps += 1;
    }
    let centre = (taps - 1) as f64 / 2.0;
    let fc = cutoff / fs;
    let norm = bessel_i0(beta);
    let mut h: Vec<f64> = (0..taps)
        .map(|i| {
            let t = i as f64 - centre;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * t).sin() / (PI * t)
            };
            let r = t / centre;
            sinc * bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / norm
        })
        .collect();
    let dc: f64 = h.iter().sum();
    for v in &mut h {
        *v /= dc;
    }
    h
}

/// Integer decimation from `fs_in` to `fs_out` behind a Kaiser anti-alias
/// low-pass whose half-amplitude point sits at 0.8 of the output Nyquist.
pub fn resample(x: &[f64], fs_in: f64, fs_out: f64) -> Result<Vec<f64>> {
    let unsupported = || Error::UnsupportedRatio { fs_in, fs_out };
    if !(fs_in > 0.0 && fs_out > 0.0) || fs_out > fs_in {
        return Err(unsupported());
    }
    let ratio = fs_in / fs_out;
    let factor = ratio.round();
    if (ratio - factor).abs() > 1e-9 * ratio {
        return Err(unsupported());
    }
    let factor = factor as usize;
    if factor == 1 {
        return Ok(x.to_vec());
    }

    let nyq_out = fs_out / 2.0;
    let h = kaiser_lowpass(0.8 * nyq_out, 0.4 * nyq_out, STOPBAND_DB, fs_in);
    let half = (h.len() - 1) / 2;
    let out_len = x.len() / factor;
    let n = x.len() as isize;
    Ok((0..out_len)
        .map(|m| {
            let centre = (m * factor) as isize;
            h.iter()
                .enumerate()
                .filter_map(|(k, &hk)| {
                    let idx = centre + half as isize - k as isize;
                    (0..n).contains(&idx).then(|| hk * x[idx as usize])
                })
                .sum()
        })
        .collect())
}

use super::{mean, SignalWindow};
use crate::error::{invalid, Error, Result};

fn whole_samples(value: f64, what: &str) -> Result<usize> {
    let rounded = value.round();
    if (value - rounded).abs() > 1e-9 * value.abs().max(1.0) || rounded < 0.0 {
        return invalid(format!(
            "{what} must be a whole number of samples, got {value}"
        ));
    }
    Ok(rounded as usize)
}

/// Cuts `x` into windows of `window_s` seconds advancing by
/// `window_s * (1 - overlap_frac)` seconds. A trailing partial window is
/// dropped; a signal shorter than one window yields no windows.
pub fn segment(
    x: &[f64],
    fs: f64,
    window_s: f64,
    overlap_frac: f64,
    subject_id: u32,
) -> Result<Vec<SignalWindow>> {
    if !(fs > 0.0) {
        return invalid("sampling rate must be positive");
    }
    if !(0.0..1.0).contains(&overlap_frac) {
        return invalid(format!("overlap must be in [0, 1), got {overlap_frac}"));
    }
    let width = whole_samples(window_s * fs, "window length")?;
    let hop = whole_samples(window_s * (1.0 - overlap_frac) * fs, "hop")?;
    if width == 0 || hop == 0 {
        return invalid("window and hop must be at least one sample");
    }
    if x.len() < width {
        return Ok(Vec::new());
    }
    let count = (x.len() - width) / hop + 1;
    Ok((0..count)
        .map(|i| SignalWindow {
            samples: x[i * hop..i * hop + width].to_vec(),
            fs,
            subject_id,
        })
        .collect())
}

/// Scales a window to [0, 1] and removes its mean.
pub fn normalize(w: &SignalWindow) -> Result<SignalWindow> {
    let (lo, hi) = w
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !(hi > lo) {
        return Err(Error::DegenerateWindow);
    }
    let range = hi - lo;
    let scaled: Vec<f64> = w.samples.iter().map(|v| (v - lo) / range).collect();
    let m = mean(&scaled);
    Ok(w.with_samples(scaled.into_iter().map(|v| v - m).collect()))
}

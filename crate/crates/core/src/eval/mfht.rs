//! Matched-filter Hilbert-transform R-peak detection.

use crate::dsp::{analytic_envelope, cross_correlate, mean, SignalWindow};
use crate::error::{invalid, Error, Result};

/// Default template span around each R peak, in seconds.
pub const TEMPLATE_PRE_S: f64 = 0.25;
pub const TEMPLATE_POST_S: f64 = 0.50;
pub const MIN_PEAK_DISTANCE_S: f64 = 0.333;
pub const PEAK_HEIGHT_FACTOR: f64 = 2.0;
pub const MATCH_TOLERANCE_S: f64 = 0.060;

/// Sorted R-peak sample indices.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSet {
    pub indices: Vec<usize>,
    pub fs: f64,
}

impl PeakSet {
    pub fn new(mut indices: Vec<usize>, fs: f64) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices, fs }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Average cardiac cycle, `pre_s` before to `post_s` after the R peak.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub samples: Vec<f64>,
    pub fs: f64,
    pub pre_s: f64,
    pub post_s: f64,
}

impl Template {
    /// Samples before the R peak.
    pub fn pre_samples(&self) -> usize {
        (self.pre_s * self.fs).round() as usize
    }
}

fn span(fs: f64, pre_s: f64, post_s: f64) -> Result<(usize, usize)> {
    if !(fs > 0.0 && pre_s >= 0.0 && post_s > 0.0) {
        return invalid("template span needs fs > 0, pre >= 0 and post > 0");
    }
    let pre = (pre_s * fs).round() as usize;
    let len = ((pre_s + post_s) * fs).round() as usize;
    Ok((pre, len))
}

/// Mean of all peak-aligned segments that fit entirely inside their window.
pub fn extract_template(
    clean: &[SignalWindow],
    peaks: &[PeakSet],
    pre_s: f64,
    post_s: f64,
) -> Result<Template> {
    if clean.len() != peaks.len() {
        return invalid(format!(
            "{} windows but {} peak sets",
            clean.len(),
            peaks.len()
        ));
    }
    let fs = match clean.first() {
        Some(w) => w.fs,
        None => return Err(Error::InsufficientData("no windows".into())),
    };
    let (pre, len) = span(fs, pre_s, post_s)?;
    let mut acc = vec![0.0; len];
    let mut count = 0usize;
    for (w, p) in clean.iter().zip(peaks) {
        if w.fs != fs || p.fs != fs {
            return invalid("all windows and peak sets must share one sampling rate");
        }
        for &r in &p.indices {
            if r < pre || r - pre + len > w.len() {
                continue;
            }
            for (a, v) in acc.iter_mut().zip(&w.samples[r - pre..r - pre + len]) {
                *a += v;
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InsufficientData(
            "no complete cardiac cycle for the template".into(),
        ));
    }
    Ok(Template {
        samples: acc.into_iter().map(|v| v / count as f64).collect(),
        fs,
        pre_s,
        post_s,
    })
}

/// Envelope of the analytic signal of the template cross-correlation.
pub fn mfht_envelope(x: &SignalWindow, t: &Template) -> Result<Vec<f64>> {
    if x.fs != t.fs {
        return invalid(format!("window at {} Hz, template at {} Hz", x.fs, t.fs));
    }
    if t.samples.len() >= x.len() {
        return invalid("template must be shorter than the window");
    }
    analytic_envelope(&cross_correlate(&x.samples, &t.samples)?)
}

/// Maxima of `a` at or above `height_factor * mean(a)`, accepted tallest
/// first and skipping any closer than `min_dist_s` to one already taken.
/// Flat tops count once at their middle sample; the two ends never count.
pub fn find_peaks(a: &[f64], fs: f64, min_dist_s: f64, height_factor: f64) -> PeakSet {
    let threshold = height_factor * mean(a);
    let mut candidates = Vec::new();
    let mut i = 1;
    while i + 1 < a.len() {
        if a[i - 1] < a[i] {
            let mut j = i;
            while j + 1 < a.len() && a[j + 1] == a[i] {
                j += 1;
            }
            if j + 1 < a.len() && a[j + 1] < a[i] {
                candidates.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    candidates.retain(|&i| a[i] >= threshold);
    candidates.sort_by(|&x, &y| a[y].total_cmp(&a[x]).then(x.cmp(&y)));
    let min_gap = min_dist_s * fs;
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        if kept.iter().all(|&k| (c.abs_diff(k) as f64) >= min_gap) {
            kept.push(c);
        }
    }
    PeakSet::new(kept, fs)
}

/// R-peak detections in `x`: envelope peaks shifted from template start to
/// the template's R position. Lags where the template runs past the end of
/// the window are dropped.
pub fn mfht_detect(x: &SignalWindow, t: &Template) -> Result<PeakSet> {
    let env = mfht_envelope(x, t)?;
    let lags = find_peaks(&env, x.fs, MIN_PEAK_DISTANCE_S, PEAK_HEIGHT_FACTOR);
    let pre = t.pre_samples();
    Ok(PeakSet::new(
        lags.indices
            .into_iter()
            .filter(|&n| n + t.samples.len() <= x.len())
            .map(|n| n + pre)
            .collect(),
        x.fs,
    ))
}

/// Beats per minute from the mean R-R interval.
pub fn estimate_hr(p: &PeakSet) -> Result<f64> {
    if p.indices.len() < 2 {
        return Err(Error::InsufficientPeaks(p.indices.len()));
    }
    if !(p.fs > 0.0) {
        return invalid("sampling rate must be positive");
    }
    let first = p.indices[0];
    let last = *p.indices.last().unwrap();
    let mean_rr = (last - first) as f64 / (p.indices.len() - 1) as f64 / p.fs;
    Ok(60.0 / mean_rr)
}

/// Fraction of detections matched one-to-one to a reference peak within
/// `tol_s`. Closest pairs are matched first. No detections gives 0.
pub fn r_peak_precision(detected: &PeakSet, reference: &PeakSet, tol_s: f64) -> f64 {
    if detected.is_empty() {
        return 0.0;
    }
    let tol = tol_s * detected.fs + 1e-9;
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (i, &d) in detected.indices.iter().enumerate() {
        for (j, &r) in reference.indices.iter().enumerate() {
            let dist = d.abs_diff(r);
            if dist as f64 <= tol {
                pairs.push((dist, i, j));
            }
        }
    }
    pairs.sort_unstable();
    let mut det_used = vec![false; detected.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut matched = 0;
    for (_, i, j) in pairs {
        if !det_used[i] && !ref_used[j] {
            det_used[i] = true;
            ref_used[j] = true;
            matched += 1;
        }
    }
    matched as f64 / detected.len() as f64
}

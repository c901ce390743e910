//! Evaluation: matched-filter heart rate, R-peak precision and SNR
//! improvement, per window and aggregated.

mod mfht;
mod occlusion;

use std::io::Write;

use rayon::prelude::*;

use crate::dsp::SignalWindow;
use crate::error::{invalid, Error, Result};
use crate::model::DcaeModel;
use crate::noise::{compute_snr, NoisyCleanPair};

pub use mfht::{
    estimate_hr, extract_template, find_peaks, mfht_detect, mfht_envelope, r_peak_precision,
    PeakSet, Template, MATCH_TOLERANCE_S, MIN_PEAK_DISTANCE_S, PEAK_HEIGHT_FACTOR, TEMPLATE_POST_S,
    TEMPLATE_PRE_S,
};
pub use occlusion::{first_full_beat, occlusion_probe, OcclusionRow, Region};

/// Anything that maps noisy windows to cleaned ones.
pub trait Denoiser: Sync {
    fn denoise_all(&self, windows: &[&SignalWindow]) -> Result<Vec<SignalWindow>>;
}

impl Denoiser for DcaeModel {
    fn denoise_all(&self, windows: &[&SignalWindow]) -> Result<Vec<SignalWindow>> {
        DcaeModel::denoise_all(self, windows)
    }
}

/// Passes windows through unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Denoiser for Identity {
    fn denoise_all(&self, windows: &[&SignalWindow]) -> Result<Vec<SignalWindow>> {
        Ok(windows.iter().map(|w| (*w).clone()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrImprovement {
    pub snr_in: f64,
    pub snr_out: f64,
    pub snr_imp: f64,
}

/// SNR in dB, with a perfect reconstruction reported as `+inf`.
fn snr_or_inf(clean: &[f64], other: &[f64]) -> Result<f64> {
    match compute_snr(clean, other) {
        Err(Error::InfiniteSnr) => Ok(f64::INFINITY),
        r => r,
    }
}

pub fn snr_improvement(
    clean: &SignalWindow,
    noisy: &SignalWindow,
    denoised: &SignalWindow,
) -> Result<SnrImprovement> {
    let snr_in = compute_snr(&clean.samples, &noisy.samples)?;
    let snr_out = compute_snr(&clean.samples, &denoised.samples)?;
    Ok(SnrImprovement {
        snr_in,
        snr_out,
        snr_imp: snr_out - snr_in,
    })
}

/// One window's metrics. Heart rates are `None` when fewer than two
/// peaks were found.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub index: usize,
    pub subject: u32,
    pub target_snr: f64,
    pub snr_in: f64,
    pub snr_out: f64,
    pub snr_imp: f64,
    pub hr_reference: Option<f64>,
    pub hr_noisy: Option<f64>,
    pub hr_denoised: Option<f64>,
    pub precision_noisy: f64,
    pub precision_denoised: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub windows: usize,
    pub median_snr_in: f64,
    pub median_snr_out: f64,
    pub median_snr_imp: f64,
    pub fraction_improved: f64,
    /// Mean absolute HR error over windows where both rates exist.
    pub mae_noisy: f64,
    pub mae_denoised: f64,
    /// Windows left out of the corresponding MAE.
    pub hr_missing_noisy: usize,
    pub hr_missing_denoised: usize,
    pub median_precision_noisy: f64,
    pub median_precision_denoised: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub summary: EvalSummary,
}

/// Median of the non-NaN values; NaN when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn mae(rows: &[EvalRow], pick: impl Fn(&EvalRow) -> Option<f64>) -> (f64, usize) {
    let mut errs: Vec<f64> = Vec::new();
    let mut missing = 0;
    for r in rows {
        match (r.hr_reference, pick(r)) {
            (Some(a), Some(b)) => errs.push((a - b).abs()),
            _ => missing += 1,
        }
    }
    let m = if errs.is_empty() {
        f64::NAN
    } else {
        errs.iter().sum::<f64>() / errs.len() as f64
    };
    (m, missing)
}

fn summarize(rows: &[EvalRow]) -> EvalSummary {
    let (mae_noisy, hr_missing_noisy) = mae(rows, |r| r.hr_noisy);
    let (mae_denoised, hr_missing_denoised) = mae(rows, |r| r.hr_denoised);
    EvalSummary {
        windows: rows.len(),
        median_snr_in: median(rows.iter().map(|r| r.snr_in)),
        median_snr_out: median(rows.iter().map(|r| r.snr_out)),
        median_snr_imp: median(rows.iter().map(|r| r.snr_imp)),
        fraction_improved: rows.iter().filter(|r| r.snr_imp > 0.0).count() as f64
            / rows.len() as f64,
        mae_noisy,
        mae_denoised,
        hr_missing_noisy,
        hr_missing_denoised,
        median_precision_noisy: median(rows.iter().map(|r| r.precision_noisy)),
        median_precision_denoised: median(rows.iter().map(|r| r.precision_denoised)),
    }
}

fn row(
    index: usize,
    pair: &NoisyCleanPair,
    denoised: &SignalWindow,
    template: &Template,
) -> Result<EvalRow> {
    let snr_in = snr_or_inf(&pair.clean.samples, &pair.noisy.samples)?;
    let snr_out = snr_or_inf(&pair.clean.samples, &denoised.samples)?;
    let reference = PeakSet::new(pair.reference_peaks.clone(), pair.clean.fs);
    let det_clean = mfht_detect(&pair.clean, template)?;
    let det_noisy = mfht_detect(&pair.noisy, template)?;
    let det_denoised = mfht_detect(denoised, template)?;
    Ok(EvalRow {
        index,
        subject: pair.subject_id(),
        target_snr: pair.target_snr,
        snr_in,
        snr_out,
        snr_imp: snr_out - snr_in,
        hr_reference: estimate_hr(&det_clean).ok(),
        hr_noisy: estimate_hr(&det_noisy).ok(),
        hr_denoised: estimate_hr(&det_denoised).ok(),
        precision_noisy: r_peak_precision(&det_noisy, &reference, MATCH_TOLERANCE_S),
        precision_denoised: r_peak_precision(&det_denoised, &reference, MATCH_TOLERANCE_S),
    })
}

/// Denoises every pair and scores both the noisy input and the output
/// against the clean reference.
pub fn evaluate_dataset<D: Denoiser + ?Sized>(
    denoiser: &D,
    pairs: &[NoisyCleanPair],
    template: &Template,
) -> Result<EvalReport> {
    if pairs.is_empty() {
        return invalid("nothing to evaluate");
    }
    let noisy: Vec<&SignalWindow> = pairs.iter().map(|p| &p.noisy).collect();
    let denoised = denoiser.denoise_all(&noisy)?;
    if denoised.len() != pairs.len() {
        return Err(Error::Shape(format!(
            "denoiser returned {} windows for {}",
            denoised.len(),
            pairs.len()
        )));
    }
    let rows = pairs
        .par_iter()
        .zip(denoised.par_iter())
        .enumerate()
        .map(|(i, (p, d))| row(i, p, d, template))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&rows);
    Ok(EvalReport { rows, summary })
}

/// Template from the clean windows of one subject and their reference peaks.
pub fn subject_template(pairs: &[NoisyCleanPair], subject: u32) -> Result<Template> {
    let chosen: Vec<&NoisyCleanPair> = pairs.iter().filter(|p| p.subject_id() == subject).collect();
    let windows: Vec<SignalWindow> = chosen.iter().map(|p| p.clean.clone()).collect();
    let peaks: Vec<PeakSet> = chosen
        .iter()
        .map(|p| PeakSet::new(p.reference_peaks.clone(), p.clean.fs))
        .collect();
    extract_template(&windows, &peaks, TEMPLATE_PRE_S, TEMPLATE_POST_S)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_eval_csv<W: Write>(out: &mut W, rows: &[EvalRow]) -> Result<()> {
    writeln!(
        out,
        "index,subject,target_snr,snr_in,snr_out,snr_imp,hr_reference,hr_noisy,hr_denoised,precision_noisy,precision_denoised"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.index,
            r.subject,
            r.target_snr,
            r.snr_in,
            r.snr_out,
            r.snr_imp,
            opt(r.hr_reference),
            opt(r.hr_noisy),
            opt(r.hr_denoised),
            r.precision_noisy,
            r.precision_denoised
        )?;
    }
    Ok(())
}

fn json_num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "null".into()
    }
}

/// Aggregates as a flat JSON object.
pub fn write_summary<W: Write>(out: &mut W, s: &EvalSummary) -> Result<()> {
    let fields = [
        ("windows", s.windows.to_string()),
        ("median_snr_in", json_num(s.median_snr_in)),
        ("median_snr_out", json_num(s.median_snr_out)),
        ("median_snr_imp", json_num(s.median_snr_imp)),
        ("fraction_improved", json_num(s.fraction_improved)),
        ("mae_noisy", json_num(s.mae_noisy)),
        ("mae_denoised", json_num(s.mae_denoised)),
        ("hr_missing_noisy", s.hr_missing_noisy.to_string()),
        ("hr_missing_denoised", s.hr_missing_denoised.to_string()),
        ("median_precision_noisy", json_num(s.median_precision_noisy)),
        (
            "median_precision_denoised",
            json_num(s.median_precision_denoised),
        ),
    ];
    writeln!(out, "{{")?;
    for (i, (k, v)) in fields.iter().enumerate() {
        let comma = if i + 1 < fields.len() { "," } else { "" };
        writeln!(out, "  \"{k}\": {v}{comma}")?;
    }
    writeln!(out, "}}")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_improvement_examples() {
        let clean = SignalWindow::new((0..200).map(|i| (i as f64 * 0.2).sin()).collect(), 100.0, 0)
            .unwrap();
        let noise: Vec<f64> = (0..200)
            .map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.5)
            .collect();
        let noisy = clean.with_samples(
            clean
                .samples
                .iter()
                .zip(&noise)
                .map(|(c, n)| c + n)
                .collect(),
        );
        let half = clean.with_samples(
            clean
                .samples
                .iter()
                .zip(&noise)
                .map(|(c, n)| c + 0.5 * n)
                .collect(),
        );
        let s = snr_improvement(&clean, &noisy, &half).unwrap();
        assert!((s.snr_imp - 10.0 * 4f64.log10()).abs() < 1e-9);
        assert_eq!(s.snr_imp, s.snr_out - s.snr_in);
        assert_eq!(
            snr_improvement(&clean, &noisy, &noisy).unwrap().snr_imp,
            0.0
        );
        assert!(((4.28 - -1.62) - 5.90f64).abs() < 1e-12);
    }

    #[test]
    fn median_rules() {
        assert_eq!(median([3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median([4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median([f64::NAN, 1.0]), 1.0);
        assert!(median(Vec::<f64>::new()).is_nan());
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let t = Template {
            samples: vec![1.0; 75],
            fs: 100.0,
            pre_s: 0.25,
            post_s: 0.5,
        };
        assert!(evaluate_dataset(&Identity, &[], &t).is_err());
    }
}

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};

/// Discrete analytic signal: zero the negative frequencies, double the
/// positive ones, keep DC and Nyquist. Works for any length.
pub fn analytic_signal(y: &[f64]) -> Result<Vec<Complex64>> {
    let n = y.len();
    if n < 2 {
        return invalid("analytic signal needs at least two samples");
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    for (k, c) in buf.iter_mut().enumerate() {
        let weight = if k == 0 || (n.is_multiple_of(2) && k == half) {
            1.0
        } else if k <= (n - 1) / 2 {
            2.0
        } else {
            0.0
        };
        *c *= weight / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    Ok(buf)
}

/// Instantaneous amplitude `sqrt(y^2 + H{y}^2)`.
pub fn analytic_envelope(y: &[f64]) -> Result<Vec<f64>> {
    Ok(analytic_signal(y)?.iter().map(|c| c.norm()).collect())
}

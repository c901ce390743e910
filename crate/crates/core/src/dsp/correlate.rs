use crate::error::{invalid, Result};

/// `y(n) = sum_k x(n+k) w(k)` with zeros beyond the end of `x`.
///
/// The output has the length of `x`; `y(n)` is largest where the template
/// lines up starting at sample `n`.
pub fn cross_correlate(x: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    if w.is_empty() {
        return invalid("empty template");
    }
    if w.len() > x.len() {
        return invalid(format!(
            "template ({}) longer than signal ({})",
            w.len(),
            x.len()
        ));
    }
    Ok((0..x.len())
        .map(|n| {
            let avail = (x.len() - n).min(w.len());
            x[n..n + avail]
                .iter()
                .zip(&w[..avail])
                .fold(0.0, |acc, (a, b)| acc + a * b)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(x: &[f64], w: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for n in 0..x.len() {
            let mut acc = 0.0;
            for k in 0..w.len() {
                let v = if n + k < x.len() { x[n + k] } else { 0.0 };
                acc += v * w[k];
            }
            y[n] = acc;
        }
        y
    }

    #[test]
    fn examples() {
        assert_eq!(
            cross_correlate(&[0.0, 0.0, 1.0, 0.0, 0.0], &[1.0]).unwrap(),
            vec![0.0, 0.0, 1.0, 0.0, 0.0]
        );
        assert_eq!(
            cross_correlate(&[1.0, 2.0, 3.0, 0.0], &[1.0, 1.0]).unwrap(),
            vec![3.0, 5.0, 3.0, 0.0]
        );
        let y = cross_correlate(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        let argmax = (0..3).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap();
        assert_eq!(argmax, 0);
        assert!(cross_correlate(&[1.0], &[]).is_err());
        assert!(cross_correlate(&[1.0], &[1.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn matches_double_loop(
            x in proptest::collection::vec(-10.0f64..10.0, 1..64),
            wlen in 1usize..64,
            seed in any::<u64>(),
        ) {
            let wlen = wlen.min(x.len());
            let w: Vec<f64> = (0..wlen).map(|i| ((seed >> (i % 60)) & 7) as f64 - 3.5).collect();
            let a = cross_correlate(&x, &w).unwrap();
            let b = brute(&x, &w);
            for (p, q) in a.iter().zip(&b) {
                prop_assert!((p - q).abs() <= 1e-12 * (1.0 + q.abs()));
            }
        }
    }
}

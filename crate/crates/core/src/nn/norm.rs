use super::tensor::{NamedTensor, Param, Tensor3};
use super::Mode;
use crate::error::{invalid, Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
struct BnCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    batch_stats: bool,
}

/// Per-channel batch normalization over the batch and length axes.
///
/// Running variance tracks the unbiased batch variance; normalization in
/// train mode uses the biased one.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm1d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    buffer_names: [String; 2],
    buffer_shape: Vec<usize>,
    pub eps: f64,
    pub momentum: f64,
    cache: Option<BnCache>,
}

impl BatchNorm1d {
    pub fn new(name: &str, channels: usize) -> Self {
        Self {
            gamma: Param::new(format!("{name}.gamma"), vec![channels], vec![1.0; channels]),
            beta: Param::new(format!("{name}.beta"), vec![channels], vec![0.0; channels]),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            buffer_names: [
                format!("{name}.running_mean"),
                format!("{name}.running_var"),
            ],
            buffer_shape: vec![channels],
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, x: &Tensor3) -> Result<()> {
        if x.channels() != self.channels() {
            return Err(Error::Shape(format!(
                "{} expects {} channels, got {}",
                self.gamma.name,
                self.channels(),
                x.channels()
            )));
        }
        Ok(())
    }

    fn normalize_with(&self, x: &Tensor3, mean: &[f64], inv_std: &[f64]) -> (Tensor3, Vec<f64>) {
        let (batch, ch, len) = x.shape();
        let mut xhat = vec![0.0; x.data().len()];
        let mut out = Tensor3::zeros(batch, ch, len);
        for b in 0..batch {
            for c in 0..ch {
                let start = (b * ch + c) * len;
                let (g, s) = (self.gamma.value[c], self.beta.value[c]);
                let span = start..start + len;
                let dst = out.data_mut()[span.clone()].iter_mut();
                for ((h, o), v) in xhat[span.clone()].iter_mut().zip(dst).zip(&x.data()[span]) {
                    *h = (v - mean[c]) * inv_std[c];
                    *o = g * *h + s;
                }
            }
        }
        (out, xhat)
    }

    pub fn eval(&self, x: &Tensor3) -> Result<Tensor3> {
        self.check(x)?;
        let inv_std: Vec<f64> = self
            .running_var
            .iter()
            .map(|v| 1.0 / (v + self.eps).sqrt())
            .collect();
        Ok(self.normalize_with(x, &self.running_mean, &inv_std).0)
    }

    pub fn forward(&mut self, x: &Tensor3, mode: Mode) -> Result<Tensor3> {
        self.check(x)?;
        let (batch, ch, len) = x.shape();
        let (y, xhat, inv_std) = match mode {
            Mode::Eval => {
                let inv_std: Vec<f64> = self
                    .running_var
                    .iter()
                    .map(|v| 1.0 / (v + self.eps).sqrt())
                    .collect();
                let (y, xhat) = self.normalize_with(x, &self.running_mean, &inv_std);
                (y, xhat, inv_std)
            }
            Mode::Train => {
                let n = batch * len;
                if n < 2 {
                    return invalid(
                        "batch norm in train mode needs more than one value per channel",
                    );
                }
                let mut mean = vec![0.0; ch];
                let mut var = vec![0.0; ch];
                for c in 0..ch {
                    let mut s = 0.0;
                    for b in 0..batch {
                        s += x.channel(b, c).iter().sum::<f64>();
                    }
                    let m = s / n as f64;
                    let mut ss = 0.0;
                    for b in 0..batch {
                        ss += x
                            .channel(b, c)
                            .iter()
                            .map(|v| (v - m) * (v - m))
                            .sum::<f64>();
                    }
                    mean[c] = m;
                    var[c] = ss / n as f64;
                }
                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
                let (y, xhat) = self.normalize_with(x, &mean, &inv_std);
                let unbias = n as f64 / (n - 1) as f64;
                for c in 0..ch {
                    self.running_mean[c] =
                        (1.0 - self.momentum) * self.running_mean[c] + self.momentum * mean[c];
                    self.running_var[c] = (1.0 - self.momentum) * self.running_var[c]
                        + self.momentum * var[c] * unbias;
                }
                (y, xhat, inv_std)
            }
        };
        self.cache = Some(BnCache {
            xhat,
            inv_std,
            batch_stats: mode == Mode::Train,
        });
        Ok(y)
    }

    pub fn backward(&mut self, gout: &Tensor3) -> Result<Tensor3> {
        let cache = self.cache.take().ok_or(Error::State)?;
        let (batch, ch, len) = gout.shape();
        let mut gx = Tensor3::zeros(batch, ch, len);
        let n = (batch * len) as f64;
        for c in 0..ch {
            let mut sum_g = 0.0;
            let mut sum_gx = 0.0;
            for b in 0..batch {
                let start = (b * ch + c) * len;
                for i in start..start + len {
                    sum_g += gout.data()[i];
                    sum_gx += gout.data()[i] * cache.xhat[i];
                }
            }
            self.gamma.grad[c] += sum_gx;
            self.beta.grad[c] += sum_g;
            if !cache.batch_stats {
                // Fixed statistics: a plain per-channel scale.
                let scale = self.gamma.value[c] * cache.inv_std[c];
                for b in 0..batch {
                    let start = (b * ch + c) * len;
                    for i in start..start + len {
                        gx.data_mut()[i] = gout.data()[i] * scale;
                    }
                }
                continue;
            }
            let k = self.gamma.value[c] * cache.inv_std[c] / n;
            for b in 0..batch {
                let start = (b * ch + c) * len;
                for i in start..start + len {
                    gx.data_mut()[i] = k * (n * gout.data()[i] - sum_g - cache.xhat[i] * sum_gx);
                }
            }
        }
        Ok(gx)
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.gamma, &mut self.beta]
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.gamma, &self.beta]
    }

    pub(crate) fn named(&self) -> [NamedTensor<'_>; 4] {
        [
            NamedTensor {
                name: &self.gamma.name,
                shape: &self.gamma.shape,
                data: &self.gamma.value,
            },
            NamedTensor {
                name: &self.beta.name,
                shape: &self.beta.shape,
                data: &self.beta.value,
            },
            NamedTensor {
                name: &self.buffer_names[0],
                shape: &self.buffer_shape,
                data: &self.running_mean,
            },
            NamedTensor {
                name: &self.buffer_names[1],
                shape: &self.buffer_shape,
                data: &self.running_var,
            },
        ]
    }

    pub(crate) fn buffers_mut(&mut self) -> [(&str, &mut Vec<f64>); 2] {
        let [m, v] = &self.buffer_names;
        [
            (m.as_str(), &mut self.running_mean),
            (v.as_str(), &mut self.running_var),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel_stats(y: &Tensor3, c: usize) -> (f64, f64) {
        let vals: Vec<f64> = (0..y.batch())
            .flat_map(|b| y.channel(b, c).to_vec())
            .collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / vals.len() as f64;
        (m, v)
    }

    fn sample_input() -> Tensor3 {
        let data: Vec<f64> = (0..2 * 3 * 10)
            .map(|i| ((i * 37) % 17) as f64 * 0.3 - 1.0)
            .collect();
        Tensor3::from_vec(data, (2, 3, 10)).unwrap()
    }

    #[test]
    fn constant_channel_maps_to_zero() {
        let mut bn = BatchNorm1d::new("bn", 2);
        let x = Tensor3::from_vec(vec![3.0; 2 * 2 * 5], (2, 2, 5)).unwrap();
        let y = bn.forward(&x, Mode::Train).unwrap();
        assert!(y.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn standardizes_then_applies_affine() {
        let mut bn = BatchNorm1d::new("bn", 3);
        let x = sample_input();
        let y = bn.forward(&x, Mode::Train).unwrap();
        for c in 0..3 {
            let (m, v) = channel_stats(&y, c);
            assert!(m.abs() < 1e-6 && (v - 1.0).abs() < 1e-3, "{m} {v}");
        }
        bn.gamma.value = vec![2.0; 3];
        bn.beta.value = vec![3.0; 3];
        let y = bn.forward(&x, Mode::Train).unwrap();
        for c in 0..3 {
            let (m, v) = channel_stats(&y, c);
            assert!((m - 3.0).abs() < 1e-6);
            // eps in the denominator shrinks the std slightly
            assert!((v.sqrt() - 2.0).abs() < 1e-3);
        }
    }

    #[test]
    fn standardized_input_is_exact() {
        // Inputs already at zero mean and unit (biased) variance, eps = 0.
        let mut bn = BatchNorm1d::new("bn", 1);
        bn.eps = 0.0;
        bn.gamma.value = vec![2.0];
        bn.beta.value = vec![3.0];
        let x = Tensor3::from_vec(vec![1.0, -1.0, 1.0, -1.0], (1, 1, 4)).unwrap();
        let y = bn.forward(&x, Mode::Train).unwrap();
        assert_eq!(y.data(), &[5.0, 1.0, 5.0, 1.0]);
    }

    #[test]
    fn running_stats_update_and_eval() {
        let mut bn = BatchNorm1d::new("bn", 1);
        let x = Tensor3::from_vec(vec![1.0, 2.0, 3.0, 4.0], (1, 1, 4)).unwrap();
        bn.forward(&x, Mode::Train).unwrap();
        assert!((bn.running_mean[0] - 0.25).abs() < 1e-12);
        // unbiased var = 5/3
        assert!((bn.running_var[0] - (0.9 + 0.1 * 5.0 / 3.0)).abs() < 1e-12);
        let before = bn.running_mean.clone();
        let y = bn.eval(&x).unwrap();
        assert_eq!(bn.running_mean, before);
        let expect = (1.0 - 0.25) / (bn.running_var[0] + BN_EPS).sqrt();
        assert!((y.data()[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn single_value_train_is_rejected() {
        let mut bn = BatchNorm1d::new("bn", 1);
        assert!(bn.forward(&Tensor3::zeros(1, 1, 1), Mode::Train).is_err());
        assert!(bn.forward(&Tensor3::zeros(1, 1, 1), Mode::Eval).is_ok());
    }
}

use rand::Rng;

use super::tensor::Tensor3;
use super::Mode;
use crate::error::{invalid, Error, Result};

pub fn relu(x: &Tensor3) -> Tensor3 {
    x.map(|v| v.max(0.0))
}

pub fn tanh(x: &Tensor3) -> Tensor3 {
    x.map(f64::tanh)
}

/// Inverted dropout: in train mode each element is zeroed with
/// probability `p` and survivors are scaled by `1/(1-p)`. Returns the
/// output and the per-element multiplier that was applied.
pub fn dropout<R: Rng + ?Sized>(
    x: &Tensor3,
    p: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(Tensor3, Option<Vec<f64>>)> {
    if !(0.0..1.0).contains(&p) {
        return invalid(format!("dropout probability must be in [0, 1), got {p}"));
    }
    if mode == Mode::Eval || p == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = 1.0 / (1.0 - p);
    let mask: Vec<f64> = (0..x.data().len())
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
        .collect();
    let mut y = x.clone();
    y.data_mut()
        .iter_mut()
        .zip(&mask)
        .for_each(|(v, m)| *v *= m);
    Ok((y, Some(mask)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    pub fn new() -> Self {
        Self { mask: None }
    }

    pub fn forward(&mut self, x: &Tensor3) -> Tensor3 {
        self.mask = Some(x.data().iter().map(|&v| v > 0.0).collect());
        relu(x)
    }

    /// Active units of the last recorded forward pass.
    pub(crate) fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn backward(&mut self, g: &Tensor3) -> Result<Tensor3> {
        let mask = self.mask.take().ok_or(Error::State)?;
        let mut out = g.clone();
        out.data_mut().iter_mut().zip(&mask).for_each(|(v, &m)| {
            if !m {
                *v = 0.0
            }
        });
        Ok(out)
    }
}

impl Default for Relu {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tanh {
    output: Option<Tensor3>,
}

impl Tanh {
    pub fn new() -> Self {
        Self { output: None }
    }

    pub fn forward(&mut self, x: &Tensor3) -> Tensor3 {
        let y = tanh(x);
        self.output = Some(y.clone());
        y
    }

    pub fn backward(&mut self, g: &Tensor3) -> Result<Tensor3> {
        let y = self.output.take().ok_or(Error::State)?;
        let mut out = g.clone();
        out.data_mut()
            .iter_mut()
            .zip(y.data())
            .for_each(|(v, t)| *v *= 1.0 - t * t);
        Ok(out)
    }
}

impl Default for Tanh {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dropout {
    pub p: f64,
    /// `None` inside the tape means the pass was an identity.
    mask: Option<Option<Vec<f64>>>,
}

impl Dropout {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return invalid(format!("dropout probability must be in [0, 1), got {p}"));
        }
        Ok(Self { p, mask: None })
    }

    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor3,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Tensor3> {
        let (y, mask) = dropout(x, self.p, mode, rng)?;
        self.mask = Some(mask);
        Ok(y)
    }

    pub fn backward(&mut self, g: &Tensor3) -> Result<Tensor3> {
        match self.mask.take().ok_or(Error::State)? {
            None => Ok(g.clone()),
            Some(mask) => {
                let mut out = g.clone();
                out.data_mut()
                    .iter_mut()
                    .zip(&mask)
                    .for_each(|(v, m)| *v *= m);
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relu_example() {
        let x = Tensor3::from_vec(vec![-1.0, 0.0, 2.0], (1, 1, 3)).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn dropout_eval_is_identity() {
        let x = Tensor3::from_vec(vec![0.1, -3.0, 7.25], (1, 1, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (y, mask) = dropout(&x, 0.5, Mode::Eval, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(mask.is_none());
        assert!(dropout(&x, 1.0, Mode::Train, &mut rng).is_err());
    }

    #[test]
    fn dropout_preserves_expectation() {
        let x = Tensor3::from_vec(vec![1.0; 1_000_000], (1, 1, 1_000_000)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (y, _) = dropout(&x, 0.5, Mode::Train, &mut rng).unwrap();
        let m = y.data().iter().sum::<f64>() / 1e6;
        // Binomial std of the mean: 1/sqrt(1e6) = 0.001.
        assert!((m - 1.0).abs() < 0.01, "{m}");
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }
}

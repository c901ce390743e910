//! Central finite-difference checks of [`Network::backward`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Layer, Mode, Network, Tensor3};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `(tensor name, relative error)`, the input first.
    pub tensors: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.tensors.iter().map(|t| t.1).fold(0.0, f64::max)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Scalar probe loss `sum(out * r)` with a fixed dropout stream.
fn probe(
    net: &mut Network,
    x: &Tensor3,
    r: &[f64],
    mode: Mode,
    seed: u64,
) -> Result<(f64, Tensor3)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = net.forward(x, mode, &mut rng)?;
    let loss = out.data().iter().zip(r).map(|(a, b)| a * b).sum();
    Ok((loss, out))
}

fn relu_pattern(net: &Network) -> Vec<bool> {
    net.layers
        .iter()
        .filter_map(|l| match l {
            Layer::Relu(r) => r.mask(),
            _ => None,
        })
        .flatten()
        .copied()
        .collect()
}

/// Where to apply a finite-difference step.
#[derive(Clone, Copy)]
enum Coord {
    Input(usize),
    Param(usize, usize),
}

#[allow(clippy::too_many_arguments)]
fn central(
    net: &mut Network,
    x: &mut Tensor3,
    r: &[f64],
    mode: Mode,
    seed: u64,
    h: f64,
    at: Coord,
    base: &[bool],
) -> Result<f64> {
    let eval = |net: &mut Network, x: &mut Tensor3, delta: f64| -> Result<(f64, bool)> {
        let slot = match at {
            Coord::Input(i) => &mut x.data_mut()[i],
            Coord::Param(k, i) => &mut net.params_mut()[k].value[i],
        };
        let orig = *slot;
        *slot = orig + delta;
        let loss = probe(net, x, r, mode, seed);
        match at {
            Coord::Input(i) => x.data_mut()[i] = orig,
            Coord::Param(k, i) => net.params_mut()[k].value[i] = orig,
        }
        Ok((loss?.0, relu_pattern(net) == base))
    };
    let mut step = h;
    for attempt in 0..4 {
        let (lp, same_p) = eval(net, x, step)?;
        let (lm, same_m) = eval(net, x, -step)?;
        if (same_p && same_m) || attempt == 3 {
            return Ok((lp - lm) / (2.0 * step));
        }
        step /= 10.0;
    }
    unreachable!()
}

/// Compares backprop gradients of `sum(net(x) * r)` with central
/// differences of step `h`, for the input and every parameter. A step that
/// flips any ReLU is retried up to three times at a tenth of the size.
///
/// Relative error per tensor is `|fd - bp| / max(|fd|, |bp|, 1e-3 * G)`
/// with `G` the norm of all gradients together, so tensors whose exact
/// gradient vanishes are not judged on rounding noise alone.
pub fn check_network_gradients(
    net: &mut Network,
    x: &Tensor3,
    r: &[f64],
    mode: Mode,
    seed: u64,
    h: f64,
) -> Result<GradCheckReport> {
    net.zero_grad();
    let (_, out) = probe(net, x, r, mode, seed)?;
    let g = Tensor3::from_vec(r.to_vec(), out.shape())?;
    let gx = net.backward(&g)?;
    let mut analytic: Vec<(String, Vec<f64>)> = vec![("input".into(), gx.into_vec())];
    analytic.extend(
        net.params()
            .iter()
            .map(|p| (p.name.clone(), p.grad.clone())),
    );

    probe(net, x, r, mode, seed)?;
    let base = relu_pattern(net);
    let mut xv = x.clone();
    let mut numeric = Vec::with_capacity(analytic.len());
    numeric.push(
        (0..x.data().len())
            .map(|i| central(net, &mut xv, r, mode, seed, h, Coord::Input(i), &base))
            .collect::<Result<Vec<f64>>>()?,
    );
    for k in 0..net.params().len() {
        numeric.push(
            (0..net.params()[k].len())
                .map(|i| central(net, &mut xv, r, mode, seed, h, Coord::Param(k, i), &base))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    // Drop the tape left by the last probe.
    let _ = net.backward(&g);
    net.zero_grad();

    let total = analytic
        .iter()
        .map(|(_, a)| a.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    let floor = (1e-3 * total).max(f64::MIN_POSITIVE);
    let tensors = analytic
        .into_iter()
        .zip(numeric)
        .map(|((name, a), n)| {
            let diff: Vec<f64> = a.iter().zip(&n).map(|(p, q)| p - q).collect();
            let err = norm(&diff) / norm(&a).max(norm(&n)).max(floor);
            (name, err)
        })
        .collect();
    Ok(GradCheckReport { tensors })
}

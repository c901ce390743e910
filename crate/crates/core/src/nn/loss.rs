use super::tensor::Tensor3;
use crate::error::Result;

/// Mean over all elements of `(pred - target)^2`.
pub fn mse_loss(pred: &Tensor3, target: &Tensor3) -> Result<f64> {
    pred.same_shape(target, "mse")?;
    let n = pred.data().len().max(1) as f64;
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

/// `d mse / d pred = 2 (pred - target) / N`.
pub fn mse_grad(pred: &Tensor3, target: &Tensor3) -> Result<Tensor3> {
    pred.same_shape(target, "mse")?;
    let n = pred.data().len().max(1) as f64;
    let mut g = pred.clone();
    g.data_mut()
        .iter_mut()
        .zip(target.data())
        .for_each(|(p, t)| *p = 2.0 * (*p - t) / n);
    Ok(g)
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DcaeModel;
use crate::error::{invalid, Result};
use crate::nn::{mse_grad, mse_loss, Adam, AdamConfig, Mode, OptimizerState, Tensor3};
use crate::noise::NoisyCleanPair;
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            max_epochs: 20,
            patience: 3,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return invalid("batch size, epoch budget and patience must all be at least 1");
        }
        if !(self.adam.lr > 0.0) {
            return invalid(format!(
                "learning rate must be positive, got {}",
                self.adam.lr
            ));
        }
        Ok(())
    }
}

/// Epochs are numbered from 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Patience-based stopping on a validation metric.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            since_best: 0,
        }
    }

    /// Records `loss` for `epoch`. Returns true once `patience` epochs in a
    /// row have failed to beat the best loss.
    pub fn update(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        self.since_best >= self.patience
    }

    pub fn improved_at(&self, epoch: usize) -> bool {
        self.best_epoch == epoch
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub model: DcaeModel,
    pub history: TrainHistory,
    /// Optimizer moments matching `model`.
    pub optimizer: OptimizerState,
}

/// Splits `n` shuffled indices into batches of `size`; a trailing batch of
/// one sample joins the batch before it.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() >= 2 && out.last().map(|b| b.len()) == Some(1) {
        out.pop();
        let len = out.len();
        let start = (len - 1) * size;
        out[len - 1] = &order[start..];
    }
    out
}

fn stack(pairs: &[NoisyCleanPair], idx: &[usize]) -> Result<(Tensor3, Tensor3)> {
    let x = Tensor3::from_signals(idx.iter().map(|&i| pairs[i].noisy.samples.as_slice()))?;
    let y = Tensor3::from_signals(idx.iter().map(|&i| pairs[i].clean.samples.as_slice()))?;
    Ok((x, y))
}

/// Eval-mode mean squared error over `pairs`.
pub(crate) fn dataset_loss(
    model: &DcaeModel,
    pairs: &[NoisyCleanPair],
    batch: usize,
) -> Result<f64> {
    let idx: Vec<usize> = (0..pairs.len()).collect();
    let mut sum = 0.0;
    let mut count = 0usize;
    for chunk in idx.chunks(batch.max(1)) {
        let (x, y) = stack(pairs, chunk)?;
        let out = model.infer(&x)?;
        sum += mse_loss(&out, &y)? * y.data().len() as f64;
        count += y.data().len();
    }
    Ok(sum / count as f64)
}

pub fn train(
    model: DcaeModel,
    train_pairs: &[NoisyCleanPair],
    val_pairs: &[NoisyCleanPair],
    cfg: &TrainConfig,
) -> Result<(DcaeModel, TrainHistory)> {
    let out = train_with(model, train_pairs, val_pairs, cfg, |_| {})?;
    Ok((out.model, out.history))
}

/// Mini-batch Adam on MSE(model(noisy), clean) with early stopping on
/// validation loss. `on_epoch` sees every finished epoch.
pub fn train_with(
    mut model: DcaeModel,
    train_pairs: &[NoisyCleanPair],
    val_pairs: &[NoisyCleanPair],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_pairs.is_empty() || val_pairs.is_empty() {
        return invalid("training and validation sets must be non-empty");
    }
    if train_pairs.len() < 2 {
        return invalid("training needs at least 2 pairs for batch statistics");
    }
    let mut adam = Adam::new(cfg.adam);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut history = TrainHistory::default();
    let mut best = (model.clone(), adam.state.clone());
    let mut order: Vec<usize> = (0..train_pairs.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "shuffle", epoch as u64));
        let mut dropout_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "dropout", epoch as u64));
        order.shuffle(&mut shuffle_rng);

        let mut sum = 0.0;
        for batch in batches(&order, cfg.batch_size) {
            let (x, y) = stack(train_pairs, batch)?;
            model.net.zero_grad();
            let out = model.forward(&x, Mode::Train, &mut dropout_rng)?;
            sum += mse_loss(&out, &y)? * batch.len() as f64;
            model.backward(&mse_grad(&out, &y)?)?;
            adam.step(&mut model.params_mut())?;
        }
        let train_loss = sum / train_pairs.len() as f64;
        let val_loss = dataset_loss(&model, val_pairs, cfg.batch_size)?;
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        history.stopped_epoch = epoch;
        on_epoch(&EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });

        let stop = stopper.update(epoch, val_loss);
        if stopper.improved_at(epoch) {
            best = (model.clone(), adam.state.clone());
        }
        if stop {
            break;
        }
    }
    history.best_epoch = stopper.best_epoch;
    let (mut model, optimizer) = best;
    model.net.zero_grad();
    Ok(TrainOutcome {
        model,
        history,
        optimizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stop_trace() {
        let mut s = EarlyStopping::new(2);
        let losses = [1.0, 0.9, 0.95, 0.97];
        let mut stopped = None;
        for (i, &l) in losses.iter().enumerate() {
            if s.update(i + 1, l) {
                stopped = Some(i + 1);
                break;
            }
        }
        assert_eq!(stopped, Some(4));
        assert_eq!(s.best_epoch, 2);
    }

    #[test]
    fn trailing_singleton_merges() {
        let order: Vec<usize> = (0..65).collect();
        let b = batches(&order, 32);
        assert_eq!(b.iter().map(|b| b.len()).collect::<Vec<_>>(), vec![32, 33]);
        let order: Vec<usize> = (0..66).collect();
        assert_eq!(batches(&order, 32).len(), 3);
        let order: Vec<usize> = (0..1).collect();
        assert_eq!(batches(&order, 32).len(), 1);
    }
}

//! The denoising convolutional autoencoder: four conv blocks down to a
//! 32-channel latent, three mirrored transpose-conv blocks back up and a
//! final transpose conv squashed by tanh. Stride 1 everywhere, so every
//! layer keeps the window length.

mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::SignalWindow;
use crate::error::{Error, Result};
use crate::nn::{
    BatchNorm1d, Conv1d, ConvTranspose1d, Dropout, Layer, Mode, NamedTensor, Network, Param, Relu,
    Tanh, Tensor3,
};

pub use train::{
    train, train_with, EarlyStopping, EpochRecord, TrainConfig, TrainHistory, TrainOutcome,
};

/// Layers per encoder block: conv, batch-norm, ReLU, dropout.
const ENCODER_BLOCK: usize = 4;
/// Windows per inference batch.
const INFER_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct DcaeConfig {
    /// Channel widths from the input down to the latent, e.g. `[1, 4, 8, 16, 32]`.
    pub encoder_channels: Vec<usize>,
    /// Encoder kernel sizes, one per block. The decoder uses them reversed.
    pub kernel_sizes: Vec<usize>,
    pub stride: usize,
    pub dropout_p: f64,
    pub input_length: usize,
}

impl Default for DcaeConfig {
    fn default() -> Self {
        Self {
            encoder_channels: vec![1, 4, 8, 16, 32],
            kernel_sizes: vec![75, 45, 45, 45],
            stride: 1,
            dropout_p: 0.1,
            input_length: 1000,
        }
    }
}

impl DcaeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let ch = &self.encoder_channels;
        if ch.len() < 2 || ch.len() != self.kernel_sizes.len() + 1 {
            return bad(format!(
                "need one more channel width than kernel sizes, got {} and {}",
                ch.len(),
                self.kernel_sizes.len()
            ));
        }
        if ch[0] != 1 {
            return bad(format!("input must have 1 channel, got {}", ch[0]));
        }
        if ch.contains(&0) {
            return bad("channel widths must be positive".into());
        }
        if let Some(k) = self.kernel_sizes.iter().find(|&&k| k % 2 == 0) {
            return bad(format!("kernel sizes must be odd, got {k}"));
        }
        if self.stride != 1 {
            return bad(format!(
                "decoder only mirrors a stride-1 encoder, got stride {}",
                self.stride
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout_p));
        }
        if self.input_length == 0 {
            return bad("input length must be positive".into());
        }
        Ok(())
    }

    pub fn latent_channels(&self) -> usize {
        *self.encoder_channels.last().expect("validated")
    }

    pub fn decoder_channels(&self) -> Vec<usize> {
        self.encoder_channels.iter().rev().copied().collect()
    }

    pub fn decoder_kernel_sizes(&self) -> Vec<usize> {
        self.kernel_sizes.iter().rev().copied().collect()
    }
}

/// Learnable parameters of a mirrored autoencoder with these widths and
/// kernels, without building it.
pub fn mirrored_param_count(channels: &[usize], kernels: &[usize]) -> usize {
    let blocks = kernels.len();
    let encoder: usize = (0..blocks)
        .map(|i| channels[i] * channels[i + 1] * kernels[i] + 3 * channels[i + 1])
        .sum();
    let dec_ch: Vec<usize> = channels.iter().rev().copied().collect();
    let decoder: usize = (0..blocks)
        .map(|i| {
            let k = kernels[blocks - 1 - i];
            let conv = dec_ch[i] * dec_ch[i + 1] * k + dec_ch[i + 1];
            let bn = if i + 1 < blocks { 2 * dec_ch[i + 1] } else { 0 };
            conv + bn
        })
        .sum();
    encoder + decoder
}

/// Every non-decreasing choice of the hidden widths `a <= b <= ...`, each at
/// most `max_width`, between a 1-channel input and a `latent`-channel
/// bottleneck whose mirrored autoencoder has exactly `target` parameters.
pub fn search_hidden_widths(
    target: usize,
    kernels: &[usize],
    latent: usize,
    max_width: usize,
) -> Vec<Vec<usize>> {
    fn rec(
        prefix: &mut Vec<usize>,
        hidden: usize,
        target: usize,
        kernels: &[usize],
        latent: usize,
        max_width: usize,
        out: &mut Vec<Vec<usize>>,
    ) {
        if prefix.len() == hidden + 1 {
            let mut ch = prefix.clone();
            ch.push(latent);
            if mirrored_param_count(&ch, kernels) == target {
                out.push(ch);
            }
            return;
        }
        let lo = if prefix.len() == 1 {
            1
        } else {
            *prefix.last().unwrap()
        };
        for w in lo..=max_width {
            prefix.push(w);
            rec(prefix, hidden, target, kernels, latent, max_width, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    let hidden = kernels.len().saturating_sub(1);
    rec(
        &mut vec![1],
        hidden,
        target,
        kernels,
        latent,
        max_width,
        &mut out,
    );
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcaeModel {
    pub config: DcaeConfig,
    pub net: Network,
}

/// Seeded weight initialization for [`build_model`].
pub fn build_model(cfg: &DcaeConfig, seed: u64) -> Result<DcaeModel> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    build_with_rng(cfg, &mut rng)
}

fn build_with_rng<R: Rng + ?Sized>(cfg: &DcaeConfig, rng: &mut R) -> Result<DcaeModel> {
    let mut layers = Vec::new();
    let enc = &cfg.encoder_channels;
    for (i, &k) in cfg.kernel_sizes.iter().enumerate() {
        let name = format!("enc{}", i + 1);
        layers.push(Layer::Conv(Conv1d::new(
            &format!("{name}.conv"),
            enc[i],
            enc[i + 1],
            k,
            rng,
        )?));
        layers.push(Layer::BatchNorm(BatchNorm1d::new(
            &format!("{name}.bn"),
            enc[i + 1],
        )));
        layers.push(Layer::Relu(Relu::new()));
        layers.push(Layer::Dropout(Dropout::new(cfg.dropout_p)?));
    }
    let dec = cfg.decoder_channels();
    let kernels = cfg.decoder_kernel_sizes();
    let blocks = kernels.len();
    for (i, &k) in kernels.iter().enumerate() {
        if i + 1 == blocks {
            layers.push(Layer::ConvTranspose(ConvTranspose1d::new(
                "out.tconv",
                dec[i],
                dec[i + 1],
                k,
                rng,
            )?));
            layers.push(Layer::Tanh(Tanh::new()));
        } else {
            let name = format!("dec{}", i + 1);
            layers.push(Layer::ConvTranspose(ConvTranspose1d::new(
                &format!("{name}.tconv"),
                dec[i],
                dec[i + 1],
                k,
                rng,
            )?));
            layers.push(Layer::BatchNorm(BatchNorm1d::new(
                &format!("{name}.bn"),
                dec[i + 1],
            )));
            layers.push(Layer::Relu(Relu::new()));
        }
    }
    Ok(DcaeModel {
        config: cfg.clone(),
        net: Network::new(layers),
    })
}

/// Learnable parameter count; batch-norm running statistics excluded.
pub fn count_params(model: &DcaeModel) -> usize {
    model.net.params().iter().map(|p| p.len()).sum()
}

impl DcaeModel {
    fn check_length(&self, x: &Tensor3) -> Result<()> {
        if x.channels() != 1 || x.length() != self.config.input_length {
            return Err(Error::Shape(format!(
                "model expects (batch, 1, {}), got {:?}",
                self.config.input_length,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Training-mode or eval-mode pass that records the tape for `backward`.
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor3,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Tensor3> {
        self.check_length(x)?;
        self.net.forward(x, mode, rng)
    }

    pub fn backward(&mut self, grad: &Tensor3) -> Result<Tensor3> {
        self.net.backward(grad)
    }

    /// Eval-mode forward without side effects.
    pub fn infer(&self, x: &Tensor3) -> Result<Tensor3> {
        self.check_length(x)?;
        self.net.infer(x)
    }

    pub fn denoise(&self, w: &SignalWindow) -> Result<SignalWindow> {
        let x = Tensor3::from_signals([w.samples.as_slice()])?;
        let y = self.infer(&x)?;
        Ok(w.with_samples(y.into_vec()))
    }

    /// [`DcaeModel::denoise`] over many windows, batched.
    pub fn denoise_all(&self, windows: &[&SignalWindow]) -> Result<Vec<SignalWindow>> {
        let mut out = Vec::with_capacity(windows.len());
        for chunk in windows.chunks(INFER_BATCH) {
            let x = Tensor3::from_signals(chunk.iter().map(|w| w.samples.as_slice()))?;
            let y = self.infer(&x)?;
            out.extend(
                chunk
                    .iter()
                    .enumerate()
                    .map(|(b, w)| w.with_samples(y.sample(b).to_vec())),
            );
        }
        Ok(out)
    }

    /// Encoder output for one window: latent channels by time.
    pub fn encode(&self, w: &SignalWindow) -> Result<Vec<Vec<f64>>> {
        let x = Tensor3::from_signals([w.samples.as_slice()])?;
        self.check_length(&x)?;
        let n = ENCODER_BLOCK * self.config.kernel_sizes.len();
        let z = self.net.infer_prefix(&x, n)?;
        Ok((0..z.channels())
            .map(|c| z.channel(0, c).to_vec())
            .collect())
    }

    pub fn params(&self) -> Vec<&Param> {
        self.net.params()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.net.params_mut()
    }

    pub fn named_tensors(&self) -> Vec<NamedTensor<'_>> {
        self.net.named_tensors()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_counts() {
        let cfg = DcaeConfig::default();
        let m = build_model(&cfg, 0).unwrap();
        assert_eq!(count_params(&m), 61_345);
        assert_eq!(
            mirrored_param_count(&cfg.encoder_channels, &cfg.kernel_sizes),
            61_345
        );
        let enc: usize = m.net.layers[..16]
            .iter()
            .flat_map(|l| l.params())
            .map(|p| p.len())
            .sum();
        let dec: usize = m.net.layers[16..]
            .iter()
            .flat_map(|l| l.params())
            .map(|p| p.len())
            .sum();
        assert_eq!((enc, dec), (30_720, 30_625));
    }

    #[test]
    fn single_block_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Network::new(vec![
            Layer::Conv(Conv1d::new("c", 1, 4, 75, &mut rng).unwrap()),
            Layer::BatchNorm(BatchNorm1d::new("bn", 4)),
        ]);
        assert_eq!(net.params().iter().map(|p| p.len()).sum::<usize>(), 312);
    }

    #[test]
    fn shape_and_range() {
        let m = build_model(&DcaeConfig::default(), 3).unwrap();
        let x = Tensor3::from_vec(
            (0..1000).map(|i| (i as f64 * 0.05).sin() * 5.0).collect(),
            (1, 1, 1000),
        )
        .unwrap();
        let y = m.infer(&x).unwrap();
        assert_eq!(y.shape(), (1, 1, 1000));
        assert!(y.data().iter().all(|v| v.abs() < 1.0));
        assert_eq!(m.infer(&x).unwrap(), y);
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let a = build_model(&DcaeConfig::default(), 11).unwrap();
        let b = build_model(&DcaeConfig::default(), 11).unwrap();
        let c = build_model(&DcaeConfig::default(), 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_model_gives_zero() {
        let mut m = build_model(&DcaeConfig::default(), 0).unwrap();
        for p in m.params_mut() {
            p.value.iter_mut().for_each(|v| *v = 0.0);
        }
        let x = Tensor3::from_vec(vec![0.0; 1000], (1, 1, 1000)).unwrap();
        assert!(m.infer(&x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_configs() {
        let even = DcaeConfig {
            kernel_sizes: vec![74, 45, 45, 45],
            ..Default::default()
        };
        assert!(matches!(
            build_model(&even, 0),
            Err(Error::InvalidConfig(_))
        ));
        let strided = DcaeConfig {
            stride: 2,
            ..Default::default()
        };
        assert!(matches!(
            build_model(&strided, 0),
            Err(Error::InvalidConfig(_))
        ));
        let ragged = DcaeConfig {
            encoder_channels: vec![1, 4, 8, 32],
            ..Default::default()
        };
        assert!(matches!(
            build_model(&ragged, 0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn length_and_nan_checks() {
        let m = build_model(&DcaeConfig::default(), 0).unwrap();
        let w = SignalWindow::new(vec![0.0; 999], 100.0, 0).unwrap();
        assert!(matches!(m.denoise(&w), Err(Error::Shape(_))));
        let mut x = vec![0.0; 1000];
        x[10] = f64::NAN;
        let t = Tensor3::from_vec(x, (1, 1, 1000)).unwrap();
        assert!(matches!(m.infer(&t), Err(Error::NonFinite(_))));
    }

    #[test]
    fn latent_has_32_rows() {
        let m = build_model(&DcaeConfig::default(), 0).unwrap();
        let w = SignalWindow::new(
            (0..1000).map(|i| (i as f64 * 0.1).sin()).collect(),
            100.0,
            0,
        )
        .unwrap();
        let z = m.encode(&w).unwrap();
        assert_eq!(z.len(), 32);
        assert!(z.iter().all(|r| r.len() == 1000));
    }
}

use rand::Rng;

use super::activation::{relu, tanh, Dropout, Relu, Tanh};
use super::conv::{conv_named, Conv1d, ConvTranspose1d};
use super::norm::BatchNorm1d;
use super::tensor::{NamedTensor, Param, Tensor3};
use super::Mode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv(Conv1d),
    ConvTranspose(ConvTranspose1d),
    BatchNorm(BatchNorm1d),
    Relu(Relu),
    Tanh(Tanh),
    Dropout(Dropout),
}

impl Layer {
    fn kind(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::ConvTranspose(_) => "tconv",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Relu(_) => "relu",
            Layer::Tanh(_) => "tanh",
            Layer::Dropout(_) => "dropout",
        }
    }

    fn eval(&self, x: &Tensor3) -> Result<Tensor3> {
        match self {
            Layer::Conv(l) => l.eval(x),
            Layer::ConvTranspose(l) => l.eval(x),
            Layer::BatchNorm(l) => l.eval(x),
            Layer::Relu(_) => Ok(relu(x)),
            Layer::Tanh(_) => Ok(tanh(x)),
            Layer::Dropout(_) => Ok(x.clone()),
        }
    }

    fn forward<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor3,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Tensor3> {
        match self {
            Layer::Conv(l) => l.forward(x),
            Layer::ConvTranspose(l) => l.forward(x),
            Layer::BatchNorm(l) => l.forward(x, mode),
            Layer::Relu(l) => Ok(l.forward(x)),
            Layer::Tanh(l) => Ok(l.forward(x)),
            Layer::Dropout(l) => l.forward(x, mode, rng),
        }
    }

    fn backward(&mut self, g: &Tensor3) -> Result<Tensor3> {
        match self {
            Layer::Conv(l) => l.backward(g),
            Layer::ConvTranspose(l) => l.backward(g),
            Layer::BatchNorm(l) => l.backward(g),
            Layer::Relu(l) => l.backward(g),
            Layer::Tanh(l) => l.backward(g),
            Layer::Dropout(l) => l.backward(g),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Layer::Conv(l) => l.params().to_vec(),
            Layer::ConvTranspose(l) => l.params().to_vec(),
            Layer::BatchNorm(l) => l.params().to_vec(),
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::Conv(l) => l.params_mut().into_iter().collect(),
            Layer::ConvTranspose(l) => l.params_mut().into_iter().collect(),
            Layer::BatchNorm(l) => l.params_mut().into_iter().collect(),
            _ => Vec::new(),
        }
    }

    fn named(&self) -> Vec<NamedTensor<'_>> {
        match self {
            Layer::Conv(l) => conv_named(&l.weight, &l.bias).to_vec(),
            Layer::ConvTranspose(l) => conv_named(&l.weight, &l.bias).to_vec(),
            Layer::BatchNorm(l) => l.named().to_vec(),
            _ => Vec::new(),
        }
    }
}

/// A sequential stack of layers. `forward` records the tape, `backward`
/// consumes it and accumulates parameter gradients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    pub layers: Vec<Layer>,
    recorded: bool,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self {
            layers,
            recorded: false,
        }
    }

    /// Side-effect-free eval-mode pass (running batch-norm statistics,
    /// dropout disabled).
    pub fn infer(&self, x: &Tensor3) -> Result<Tensor3> {
        self.infer_prefix(x, self.layers.len())
    }

    /// Eval-mode pass through the first `n` layers.
    pub fn infer_prefix(&self, x: &Tensor3, n: usize) -> Result<Tensor3> {
        x.check_finite("network input")?;
        let mut h = x.clone();
        for (i, layer) in self.layers[..n].iter().enumerate() {
            h = layer.eval(&h)?;
            h.check_finite(&format!("layer {i} ({})", layer.kind()))?;
        }
        Ok(h)
    }

    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor3,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Tensor3> {
        x.check_finite("network input")?;
        self.recorded = false;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            h = layer.forward(&h, mode, rng)?;
            h.check_finite(&format!("layer {i} ({})", layer.kind()))?;
        }
        self.recorded = true;
        Ok(h)
    }

    /// Back-propagates `grad` (d loss / d output) and returns d loss / d input.
    pub fn backward(&mut self, grad: &Tensor3) -> Result<Tensor3> {
        if !self.recorded {
            return Err(Error::State);
        }
        self.recorded = false;
        let mut g = grad.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .collect()
    }

    /// Every parameter and batch-norm buffer, in layer order.
    pub fn named_tensors(&self) -> Vec<NamedTensor<'_>> {
        self.layers.iter().flat_map(|l| l.named()).collect()
    }

    /// Overwrites a parameter or buffer by name. Returns false when the
    /// name is unknown; errors when the length differs.
    pub fn set_tensor(&mut self, name: &str, data: &[f64]) -> Result<bool> {
        for layer in &mut self.layers {
            if let Layer::BatchNorm(bn) = layer {
                for (n, buf) in bn.buffers_mut() {
                    if n == name {
                        return assign(name, buf, data);
                    }
                }
            }
            for p in layer.params_mut() {
                if p.name == name {
                    return assign(name, &mut p.value, data);
                }
            }
        }
        Ok(false)
    }
}

fn assign(name: &str, dst: &mut [f64], src: &[f64]) -> Result<bool> {
    if dst.len() != src.len() {
        return Err(Error::Shape(format!(
            "{name}: expected {} values, got {}",
            dst.len(),
            src.len()
        )));
    }
    dst.copy_from_slice(src);
    Ok(true)
}

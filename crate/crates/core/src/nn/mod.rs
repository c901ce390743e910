//! A small reverse-mode engine for exactly the layers the autoencoder
//! uses. Each layer records what it needs during `forward` and consumes
//! that record in `backward`, so the layer stack itself is the tape.

mod activation;
mod conv;
mod gradcheck;
mod loss;
mod network;
mod norm;
mod optim;
mod tensor;

pub use activation::{dropout, relu, tanh, Dropout, Relu, Tanh};
pub use conv::{Conv1d, ConvTranspose1d};
pub use gradcheck::{check_network_gradients, GradCheckReport};
pub use loss::{mse_grad, mse_loss};
pub use network::{Layer, Network};
pub use norm::{BatchNorm1d, BN_EPS, BN_MOMENTUM};
pub use optim::{adam_update, Adam, AdamConfig, OptimizerState};
pub use tensor::{NamedTensor, Param, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Train,
    Eval,
}

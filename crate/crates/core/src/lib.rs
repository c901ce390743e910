//! Synthetic noisy-ECG generation, a small 1D denoising convolutional
//! autoencoder trained with a from-scratch reverse-mode engine, and
//! matched-filter Hilbert-transform heart-rate evaluation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod nn;
pub mod noise;
pub mod seed;

pub use dsp::{PsdEstimate, RawRecord, SignalWindow};
pub use error::{Error, Result};
pub use eval::{EvalReport, PeakSet, Template};
pub use model::{DcaeConfig, DcaeModel, TrainConfig, TrainHistory};
pub use nn::{OptimizerState, Tensor3};
pub use noise::{NoiseMixConfig, NoisyCleanPair};

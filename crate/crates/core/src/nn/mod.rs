//! Minimal neural-network kernels with explicit backward passes.
//!
//! Every layer caches what its backward pass needs during [`Layer::forward`]
//! and accumulates parameter gradients into its [`Param`]s. [`Layer::infer`]
//! is the cache-free inference path and only needs `&self`, so a frozen
//! network can be shared between threads.

mod activation;
mod adam;
mod batchnorm;
mod conv;
mod dense;
mod dropout;
pub mod gradcheck;
mod gru;
mod init;
mod loss;
mod pool;
mod scalar;
mod sequence;
mod tensor;

pub use activation::{elu, sigmoid, softmax, Elu};
pub use adam::{Adam, AdamConfig};
pub use batchnorm::BatchNorm;
pub use conv::Conv2d;
pub use dense::Dense;
pub use dropout::Dropout;
pub use gradcheck::{grad_check, GradCheckReport};
pub use gru::Gru;
pub use init::glorot_uniform;
pub use loss::{cross_entropy, sigmoid_binary_cross_entropy, softmax_cross_entropy};
pub use pool::MaxPool2d;
pub use scalar::{matmul, matmul_at, matmul_bt, Scalar};
pub use sequence::{Readout, SequenceReadout, ToSequence};
pub use tensor::{Param, Tensor};

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Random source used for dropout masks and initialization.
pub type NnRng = ChaCha8Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("batch normalization needs at least 2 values per channel in training, got {0}")]
    BatchTooSmall(usize),
    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(usize),
    #[error("backward called before forward")]
    NoCache,
}

/// How a caching forward pass behaves.
pub enum Phase<'a> {
    /// Batch statistics in batch norm, dropout masks drawn from the rng.
    Train(&'a mut NnRng),
    /// Running statistics, dropout disabled. Still caches for backward.
    Eval,
}

impl Phase<'_> {
    pub fn is_training(&self) -> bool {
        matches!(self, Phase::Train(_))
    }
}

pub trait Layer<T: Scalar> {
    fn forward(&mut self, input: &Tensor<T>, phase: &mut Phase<'_>) -> Result<Tensor<T>, NnError>;

    /// Propagates `grad_output` back, accumulating parameter gradients.
    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>, NnError>;

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError>;

    fn params(&self) -> Vec<&Param<T>> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        Vec::new()
    }

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

pub(crate) fn expect_rank<T: Scalar>(t: &Tensor<T>, rank: usize, what: &str) -> Result<(), NnError> {
    if t.shape().len() != rank {
        return Err(NnError::Shape(format!("{what} expects rank {rank}, got {:?}", t.shape())));
    }
    Ok(())
}

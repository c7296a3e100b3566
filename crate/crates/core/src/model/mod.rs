//! The recurrent-convolutional speaker classifier.
//!
//! Four conv blocks collapse the 96-band axis to one, the remaining time axis
//! is read as a sequence by two GRU layers, and a dense head scores the
//! training speakers. Its activations serve as speaker embeddings downstream.

mod checkpoint;
mod config;
mod dataset;
mod network;
mod train;

use std::path::PathBuf;

use rand::SeedableRng;
use thiserror::Error;

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{Head, PoolingChain, RcnnConfig};
pub use dataset::{Dataset, LabeledSegment};
pub use network::{ConvBlock, Rcnn};
pub use train::{accuracy, EpochStats, TrainOptions, TrainReport};

use crate::features::{FeatureError, FeatureKind, FeatureMatrix};
use crate::nn::{sigmoid, softmax, Layer, NnError, NnRng, Tensor};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("input shape {found:?} does not match the model's {expected:?}")]
    InputShape { expected: (usize, usize), found: (usize, usize) },
    #[error("features are {found}, model was trained on {expected}")]
    FeatureKindMismatch { expected: FeatureKind, found: FeatureKind },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("label {label} is outside the model's {n_classes} classes")]
    Label { label: usize, n_classes: usize },
    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint checksum mismatch (truncated or corrupted file)")]
    Checksum,
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint has {found} classes, expected {expected}")]
    ClassCount { expected: usize, found: usize },
}

/// Samples per inference batch.
const INFER_BATCH: usize = 32;

/// A configured network plus its count of optimizer steps.
#[derive(Debug, Clone)]
pub struct RcnnModel {
    config: RcnnConfig,
    net: Rcnn<f32>,
    steps: u64,
}

impl RcnnModel {
    /// Deterministic initialization from `seed`.
    pub fn build(config: RcnnConfig, seed: u64) -> Result<Self, ModelError> {
        let mut rng = NnRng::seed_from_u64(seed);
        let net = Rcnn::build(&config, &mut rng, false)?;
        Ok(Self { config, net, steps: 0 })
    }

    pub fn config(&self) -> &RcnnConfig {
        &self.config
    }

    pub fn network(&self) -> &Rcnn<f32> {
        &self.net
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    pub fn feature_kind(&self) -> FeatureKind {
        self.config.feature_kind
    }

    pub fn learnable_layers(&self) -> usize {
        self.net.learnable_layers()
    }

    fn check_input(&self, feat: &FeatureMatrix) -> Result<(), ModelError> {
        let expected = (self.config.input_bins, self.config.input_frames);
        let found = (feat.rows(), feat.cols());
        if found != expected {
            return Err(ModelError::InputShape { expected, found });
        }
        if feat.kind() != self.config.feature_kind {
            return Err(ModelError::FeatureKindMismatch { expected: self.config.feature_kind, found: feat.kind() });
        }
        Ok(())
    }

    pub(crate) fn stack<'a>(&self, feats: impl ExactSizeIterator<Item = &'a FeatureMatrix>) -> Result<Tensor<f32>, ModelError> {
        let n = feats.len();
        let (bins, frames) = (self.config.input_bins, self.config.input_frames);
        let mut data = Vec::with_capacity(n * bins * frames);
        for f in feats {
            self.check_input(f)?;
            data.extend_from_slice(f.values());
        }
        Ok(Tensor::from_vec(&[n, 1, bins, frames], data)?)
    }

    pub(crate) fn activate(&self, logits: &[f32]) -> Vec<f32> {
        match self.config.head {
            Head::Sigmoid => logits.iter().map(|&x| sigmoid(x)).collect(),
            Head::Softmax => softmax(logits),
        }
    }

    /// Head activations in `[0, 1]^C` for each input, inference mode.
    pub fn predict(&self, feats: &[&FeatureMatrix]) -> Result<Vec<Vec<f32>>, ModelError> {
        let mut out = Vec::with_capacity(feats.len());
        for chunk in feats.chunks(INFER_BATCH) {
            let input = self.stack(chunk.iter().copied())?;
            let logits = self.net.infer(&input)?;
            let c = self.config.n_classes;
            out.extend(logits.data().chunks(c).map(|row| self.activate(row)));
        }
        Ok(out)
    }

    /// Head activations for one feature matrix.
    pub fn forward(&self, feat: &FeatureMatrix) -> Result<Vec<f32>, ModelError> {
        Ok(self.predict(&[feat])?.pop().expect("one input, one output"))
    }

    /// Fraction of segments whose argmax activation equals the label.
    pub fn evaluate(&self, data: &Dataset) -> Result<f64, ModelError> {
        if data.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        let feats: Vec<&FeatureMatrix> = data.items().iter().map(|s| &s.features).collect();
        let preds = self.predict(&feats)?;
        Ok(accuracy(&preds, &data.labels()))
    }
}

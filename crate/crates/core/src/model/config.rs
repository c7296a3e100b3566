use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::features::{FeatureKind, N_BANDS};
use crate::nn::Readout;

/// Output nonlinearity and the loss it is trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// Independent per-class sigmoids, trained with per-class binary cross-entropy.
    #[default]
    Sigmoid,
    /// Softmax over classes, trained with categorical cross-entropy.
    Softmax,
}

impl std::str::FromStr for Head {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(Head::Sigmoid),
            "softmax" => Ok(Head::Softmax),
            _ => Err(ModelError::Config(format!("unknown head '{s}' (sigmoid or softmax)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcnnConfig {
    pub input_bins: usize,
    pub input_frames: usize,
    pub conv_channels: Vec<usize>,
    /// `(freq, time)` max-pool windows, one per conv block.
    pub pool_sizes: Vec<(usize, usize)>,
    pub kernel: usize,
    pub gru_hidden: usize,
    pub gru_layers: usize,
    pub n_classes: usize,
    pub conv_dropout: f64,
    pub recurrent_dropout: f64,
    pub head: Head,
    pub readout: Readout,
    pub feature_kind: FeatureKind,
}

/// Spatial sizes after each conv block, starting with the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolingChain {
    pub freq: Vec<usize>,
    pub time: Vec<usize>,
}

impl PoolingChain {
    pub fn sequence_len(&self) -> usize {
        *self.time.last().expect("chain starts with the input")
    }
}

impl RcnnConfig {
    pub fn new(n_classes: usize, feature_kind: FeatureKind) -> Self {
        Self {
            input_bins: N_BANDS,
            input_frames: 191,
            conv_channels: vec![32, 64, 128, 128],
            pool_sizes: vec![(2, 2), (3, 3), (4, 4), (4, 4)],
            kernel: 3,
            gru_hidden: 128,
            gru_layers: 2,
            n_classes,
            conv_dropout: 0.1,
            recurrent_dropout: 0.3,
            head: Head::Sigmoid,
            readout: Readout::Last,
            feature_kind,
        }
    }

    /// Small network used for end-to-end gradient checks: 2 channels per
    /// block, hidden size 3, 96 × 24 input, a 3-step GRU sequence.
    pub fn tiny(n_classes: usize) -> Self {
        Self {
            input_frames: 24,
            conv_channels: vec![2, 2, 2, 2],
            pool_sizes: vec![(2, 2), (3, 2), (4, 2), (4, 1)],
            gru_hidden: 3,
            ..Self::new(n_classes, FeatureKind::Cqt)
        }
    }

    pub fn pooling_chain(&self) -> Result<PoolingChain, ModelError> {
        let mut freq = vec![self.input_bins];
        let mut time = vec![self.input_frames];
        for (i, &(pf, pt)) in self.pool_sizes.iter().enumerate() {
            let (f, t) = (*freq.last().unwrap(), *time.last().unwrap());
            if pf == 0 || pt == 0 || pf > f || pt > t {
                return Err(ModelError::Config(format!(
                    "pool {i} ({pf}×{pt}) does not fit a {f}×{t} map"
                )));
            }
            freq.push(f / pf);
            time.push(t / pt);
        }
        Ok(PoolingChain { freq, time })
    }

    pub fn validate(&self) -> Result<PoolingChain, ModelError> {
        let bad = |msg: String| Err(ModelError::Config(msg));
        if self.n_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.n_classes));
        }
        if self.conv_channels.is_empty() || self.conv_channels.len() != self.pool_sizes.len() {
            return bad("one pool size per conv block is required".into());
        }
        if self.conv_channels.contains(&0) || self.gru_hidden == 0 {
            return bad("layer widths must be positive".into());
        }
        if self.kernel % 2 == 0 {
            return bad(format!("kernel {} must be odd", self.kernel));
        }
        for rate in [self.conv_dropout, self.recurrent_dropout] {
            if !(0.0..1.0).contains(&rate) {
                return bad(format!("dropout rate {rate} outside [0, 1)"));
            }
        }
        let chain = self.pooling_chain()?;
        let f = *chain.freq.last().unwrap();
        if f != 1 || self.pool_sizes.iter().map(|p| p.0).product::<usize>() != self.input_bins {
            return bad(format!("frequency pools must reduce {} bins to exactly 1, got {f}", self.input_bins));
        }
        Ok(chain)
    }

    /// Conv + batch-norm per block, one per GRU layer, plus the dense head.
    pub fn learnable_layers(&self) -> usize {
        2 * self.conv_channels.len() + self.gru_layers + 1
    }
}

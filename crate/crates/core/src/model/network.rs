use super::config::RcnnConfig;
use super::ModelError;
use crate::nn::{
    BatchNorm, Conv2d, Dense, Dropout, Elu, Gru, Layer, MaxPool2d, NnError, NnRng, Param, Phase,
    Scalar, SequenceReadout, Tensor, ToSequence,
};

/// conv → batch norm → ELU → max-pool → dropout.
#[derive(Debug, Clone)]
pub struct ConvBlock<T> {
    pub conv: Conv2d<T>,
    pub bn: BatchNorm<T>,
    elu: Elu<T>,
    pool: MaxPool2d,
    dropout: Dropout<T>,
}

/// The recurrent-convolutional classifier. Input `N×1×bins×frames`, output
/// `N×C` logits (the head nonlinearity is applied by the caller).
#[derive(Debug, Clone)]
pub struct Rcnn<T> {
    pub blocks: Vec<ConvBlock<T>>,
    to_seq: ToSequence,
    pub grus: Vec<Gru<T>>,
    gru_dropout: Dropout<T>,
    readout: SequenceReadout,
    pub dense: Dense<T>,
}

impl<T: Scalar> Rcnn<T> {
    /// Glorot-uniform weights, zero biases, `γ = 1`, `β = 0`, all drawn from `rng`.
    ///
    /// `input_grad` controls whether the first conv computes an input gradient.
    pub fn build(config: &RcnnConfig, rng: &mut NnRng, input_grad: bool) -> Result<Self, ModelError> {
        config.validate()?;
        let mut blocks = Vec::with_capacity(config.conv_channels.len());
        let mut in_ch = 1;
        for (i, (&out_ch, &(pf, pt))) in config.conv_channels.iter().zip(&config.pool_sizes).enumerate() {
            let mut conv = Conv2d::new(in_ch, out_ch, config.kernel, rng);
            if i == 0 && !input_grad {
                conv = conv.without_input_grad();
            }
            blocks.push(ConvBlock {
                conv,
                bn: BatchNorm::new(out_ch),
                elu: Elu::new(),
                pool: MaxPool2d::new(pf, pt),
                dropout: Dropout::new(config.conv_dropout)?,
            });
            in_ch = out_ch;
        }
        let mut grus = Vec::with_capacity(config.gru_layers);
        let mut width = in_ch;
        for _ in 0..config.gru_layers {
            grus.push(Gru::new(width, config.gru_hidden, rng));
            width = config.gru_hidden;
        }
        Ok(Self {
            blocks,
            to_seq: ToSequence::new(),
            grus,
            gru_dropout: Dropout::new(config.recurrent_dropout)?,
            readout: SequenceReadout::new(config.readout),
            dense: Dense::new(width, config.n_classes, rng),
        })
    }

    /// Conv and batch norm per block, each GRU layer, and the dense head.
    pub fn learnable_layers(&self) -> usize {
        2 * self.blocks.len() + self.grus.len() + 1
    }

    /// Same structure with parameters and running statistics converted to `U`.
    pub fn cast<U: Scalar>(&self, config: &RcnnConfig) -> Result<Rcnn<U>, ModelError> {
        let mut rng = <NnRng as rand::SeedableRng>::seed_from_u64(0);
        let mut out = Rcnn::<U>::build(config, &mut rng, true)?;
        for (dst, src) in out.blocks.iter_mut().zip(&self.blocks) {
            let c = |x: &[T]| x.iter().map(|v| U::lit(v.to_f64().unwrap())).collect::<Vec<U>>();
            dst.bn.set_running_stats(c(src.bn.running_mean()), c(src.bn.running_var()), src.bn.stat_steps())?;
        }
        for (dst, src) in out.params_mut().into_iter().zip(self.params()) {
            dst.value = src.value.cast();
        }
        Ok(out)
    }
}

impl<T: Scalar> Layer<T> for Rcnn<T> {
    fn forward(&mut self, input: &Tensor<T>, phase: &mut Phase<'_>) -> Result<Tensor<T>, NnError> {
        let mut x = input.clone();
        for b in &mut self.blocks {
            x = b.conv.forward(&x, phase)?;
            x = b.bn.forward(&x, phase)?;
            x = b.elu.forward(&x, phase)?;
            x = b.pool.forward(&x, phase)?;
            x = b.dropout.forward(&x, phase)?;
        }
        x = self.to_seq.forward(&x, phase)?;
        for g in &mut self.grus {
            x = g.forward(&x, phase)?;
        }
        x = self.gru_dropout.forward(&x, phase)?;
        x = self.readout.forward(&x, phase)?;
        self.dense.forward(&x, phase)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let mut g = self.dense.backward(grad_output)?;
        g = self.readout.backward(&g)?;
        g = self.gru_dropout.backward(&g)?;
        for gru in self.grus.iter_mut().rev() {
            g = gru.backward(&g)?;
        }
        g = self.to_seq.backward(&g)?;
        for b in self.blocks.iter_mut().rev() {
            g = b.dropout.backward(&g)?;
            g = b.pool.backward(&g)?;
            g = b.elu.backward(&g)?;
            g = b.bn.backward(&g)?;
            g = b.conv.backward(&g)?;
        }
        Ok(g)
    }

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let mut x = input.clone();
        for b in &self.blocks {
            x = b.conv.infer(&x)?;
            x = b.bn.infer(&x)?;
            x = b.elu.infer(&x)?;
            x = b.pool.infer(&x)?;
        }
        x = self.to_seq.infer(&x)?;
        for g in &self.grus {
            x = g.infer(&x)?;
        }
        x = self.readout.infer(&x)?;
        self.dense.infer(&x)
    }

    fn params(&self) -> Vec<&Param<T>> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.extend(b.conv.params());
            out.extend(b.bn.params());
        }
        for g in &self.grus {
            out.extend(g.params());
        }
        out.extend(self.dense.params());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.extend(b.conv.params_mut());
            out.extend(b.bn.params_mut());
        }
        for g in &mut self.grus {
            out.extend(g.params_mut());
        }
        out.extend(self.dense.params_mut());
        out
    }
}

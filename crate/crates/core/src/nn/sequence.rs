use serde::{Deserialize, Serialize};

use super::{expect_rank, Layer, NnError, Phase, Scalar, Tensor};

/// Reads a `N×C×1×T` feature map as `N×T×C`: one `C`-dimensional vector per
/// time column.
#[derive(Debug, Clone, Default)]
pub struct ToSequence {
    shape: Option<Vec<usize>>,
}

impl ToSequence {
    pub fn new() -> Self {
        Self { shape: None }
    }

    fn run<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        expect_rank(input, 4, "to_sequence")?;
        let s = input.shape();
        let (n, c, h, t) = (s[0], s[1], s[2], s[3]);
        if h != 1 {
            return Err(NnError::Shape(format!("frequency axis must be pooled to 1, got {h}")));
        }
        let mut out = Tensor::zeros(&[n, t, c]);
        for i in 0..n {
            let src = input.outer(i);
            let dst = out.outer_mut(i);
            for ch in 0..c {
                for step in 0..t {
                    dst[step * c + ch] = src[ch * t + step];
                }
            }
        }
        Ok(out)
    }
}

impl<T: Scalar> Layer<T> for ToSequence {
    fn forward(&mut self, input: &Tensor<T>, _phase: &mut Phase<'_>) -> Result<Tensor<T>, NnError> {
        let out = Self::run(input)?;
        self.shape = Some(input.shape().to_vec());
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let shape = self.shape.take().ok_or(NnError::NoCache)?;
        let (n, c, t) = (shape[0], shape[1], shape[3]);
        if grad_output.shape() != [n, t, c] {
            return Err(NnError::Shape("to_sequence grad".into()));
        }
        let mut grad = Tensor::zeros(&shape);
        for i in 0..n {
            let src = grad_output.outer(i);
            let dst = grad.outer_mut(i);
            for ch in 0..c {
                for step in 0..t {
                    dst[ch * t + step] = src[step * c + ch];
                }
            }
        }
        Ok(grad)
    }

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        Self::run(input)
    }
}

/// How a `N×T×H` sequence collapses to `N×H` before the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    #[default]
    Last,
    Mean,
}

#[derive(Debug, Clone)]
pub struct SequenceReadout {
    pub mode: Readout,
    shape: Option<Vec<usize>>,
}

impl SequenceReadout {
    pub fn new(mode: Readout) -> Self {
        Self { mode, shape: None }
    }

    fn run<T: Scalar>(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        expect_rank(input, 3, "readout")?;
        let (n, t, h) = (input.dim(0), input.dim(1), input.dim(2));
        if t == 0 {
            return Err(NnError::Shape("empty sequence".into()));
        }
        let mut out = Tensor::zeros(&[n, h]);
        for i in 0..n {
            let seq = input.outer(i);
            let dst = out.outer_mut(i);
            match self.mode {
                Readout::Last => dst.copy_from_slice(&seq[(t - 1) * h..]),
                Readout::Mean => {
                    let inv = T::one() / T::from_usize(t).unwrap();
                    for step in seq.chunks(h) {
                        for (d, &v) in dst.iter_mut().zip(step) {
                            *d += v * inv;
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

impl<T: Scalar> Layer<T> for SequenceReadout {
    fn forward(&mut self, input: &Tensor<T>, _phase: &mut Phase<'_>) -> Result<Tensor<T>, NnError> {
        let out = self.run(input)?;
        self.shape = Some(input.shape().to_vec());
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let shape = self.shape.take().ok_or(NnError::NoCache)?;
        let (n, t, h) = (shape[0], shape[1], shape[2]);
        if grad_output.shape() != [n, h] {
            return Err(NnError::Shape("readout grad".into()));
        }
        let mut grad = Tensor::zeros(&shape);
        for i in 0..n {
            let g = grad_output.outer(i);
            let dst = grad.outer_mut(i);
            match self.mode {
                Readout::Last => dst[(t - 1) * h..].copy_from_slice(g),
                Readout::Mean => {
                    let inv = T::one() / T::from_usize(t).unwrap();
                    for step in dst.chunks_mut(h) {
                        for (d, &v) in step.iter_mut().zip(g) {
                            *d = v * inv;
                        }
                    }
                }
            }
        }
        Ok(grad)
    }

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.run(input)
    }
}

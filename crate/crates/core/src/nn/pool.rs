use super::{expect_rank, Layer, NnError, Phase, Scalar, Tensor};

/// Non-overlapping max pooling over `N×C×H×W` with a `(kh, kw)` window.
///
/// Partial windows at the bottom and right edges are dropped. Backward routes
/// each gradient to the first maximum in row-major window order.
#[derive(Debug, Clone)]
pub struct MaxPool2d {
    pub kh: usize,
    pub kw: usize,
    cache: Option<(Vec<u32>, Vec<usize>)>,
}

impl MaxPool2d {
    pub fn new(kh: usize, kw: usize) -> Self {
        assert!(kh >= 1 && kw >= 1, "pool window must be non-empty");
        Self { kh, kw, cache: None }
    }

    pub fn output_dims(&self, h: usize, w: usize) -> Result<(usize, usize), NnError> {
        if self.kh > h || self.kw > w {
            return Err(NnError::Shape(format!(
                "pool window {}×{} larger than input {h}×{w}",
                self.kh, self.kw
            )));
        }
        Ok((h / self.kh, w / self.kw))
    }

    fn run<T: Scalar>(&self, input: &Tensor<T>) -> Result<(Tensor<T>, Vec<u32>), NnError> {
        expect_rank(input, 4, "maxpool")?;
        let s = input.shape();
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        let (oh, ow) = self.output_dims(h, w)?;
        let x = input.data();
        assert!(x.len() <= u32::MAX as usize, "pool input too large for u32 indices");
        let mut out = Vec::with_capacity(n * c * oh * ow);
        let mut argmax = Vec::with_capacity(n * c * oh * ow);
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                let top = base + oy * self.kh * w;
                for ox in 0..ow {
                    let mut best = top + ox * self.kw;
                    let mut best_v = x[best];
                    for dy in 0..self.kh {
                        let row = top + dy * w + ox * self.kw;
                        for (j, &v) in x[row..row + self.kw].iter().enumerate() {
                            if v > best_v {
                                best_v = v;
                                best = row + j;
                            }
                        }
                    }
                    out.push(best_v);
                    argmax.push(best as u32);
                }
            }
        }
        let out = Tensor::from_vec(&[n, c, oh, ow], out)?;
        Ok((out, argmax))
    }
}

impl<T: Scalar> Layer<T> for MaxPool2d {
    fn forward(&mut self, input: &Tensor<T>, _phase: &mut Phase<'_>) -> Result<Tensor<T>, NnError> {
        let (out, argmax) = self.run(input)?;
        self.cache = Some((argmax, input.shape().to_vec()));
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let (argmax, shape) = self.cache.take().ok_or(NnError::NoCache)?;
        if grad_output.len() != argmax.len() {
            return Err(NnError::Shape("maxpool grad".into()));
        }
        let mut grad = Tensor::zeros(&shape);
        let gd = grad.data_mut();
        for (&idx, &g) in argmax.iter().zip(grad_output.data()) {
            gd[idx as usize] += g;
        }
        Ok(grad)
    }

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        Ok(self.run(input)?.0)
    }
}

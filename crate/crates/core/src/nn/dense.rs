use super::{expect_rank, glorot_uniform, matmul, matmul_at, matmul_bt, Layer, NnError, NnRng, Param, Phase, Scalar, Tensor};

/// Fully connected layer: `N×D → N×H`, `y = W x + b` with `W` stored `H×D`.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(inputs: usize, outputs: usize, rng: &mut NnRng) -> Self {
        let weight = glorot_uniform(&[outputs, inputs], inputs, outputs, rng);
        Self::from_params(weight, Tensor::zeros(&[outputs]))
    }

    pub fn from_params(weight: Tensor<T>, bias: Tensor<T>) -> Self {
        assert_eq!(weight.shape().len(), 2, "dense weight must be H×D");
        assert_eq!(bias.len(), weight.dim(0), "one bias per output");
        Self { weight: Param::new(weight), bias: Param::new(bias), cache: None }
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.dim(1)
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.dim(0)
    }

    fn run(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        expect_rank(input, 2, "dense")?;
        let (n, d) = (input.dim(0), input.dim(1));
        if d != self.inputs() {
            return Err(NnError::Shape(format!("dense expects {} inputs, got {d}", self.inputs())));
        }
        let h = self.outputs();
        let mut out = Tensor::zeros(&[n, h]);
        for i in 0..n {
            out.outer_mut(i).copy_from_slice(self.bias.value.data());
        }
        matmul_bt(n, d, h, input.data(), self.weight.value.data(), out.data_mut(), true);
        Ok(out)
    }
}

impl<T: Scalar> Layer<T> for Dense<T> {
    fn forward(&mut self, input: &Tensor<T>, _phase: &mut Phase<'_>) -> Result<Tensor<T>, NnError> {
        let out = self.run(input)?;
        self.cache = Some(input.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let input = self.cache.take().ok_or(NnError::NoCache)?;
        let (n, d, h) = (input.dim(0), self.inputs(), self.outputs());
        if grad_output.shape() != [n, h] {
            return Err(NnError::Shape(format!("dense grad {:?}", grad_output.shape())));
        }
        matmul_at(h, n, d, grad_output.data(), input.data(), self.weight.grad.data_mut(), true);
        for i in 0..n {
            for (b, &g) in self.bias.grad.data_mut().iter_mut().zip(grad_output.outer(i)) {
                *b += g;
            }
        }
        let mut grad_input = Tensor::zeros(&[n, d]);
        matmul(n, h, d, grad_output.data(), self.weight.value.data(), grad_input.data_mut(), false);
        Ok(grad_input)
    }

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.run(input)
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

use super::{Layer, NnError, Phase, Scalar, Tensor};

pub fn elu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        x.exp() - T::one()
    }
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Numerically stable softmax of one row.
pub fn softmax<T: Scalar>(row: &[T]) -> Vec<T> {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = row.iter().map(|&x| (x - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Exponential linear unit with α = 1.
#[derive(Debug, Clone, Default)]
pub struct Elu<T> {
    output: Option<Tensor<T>>,
}

impl<T: Scalar> Elu<T> {
    pub fn new() -> Self {
        Self { output: None }
    }
}

impl<T: Scalar> Layer<T> for Elu<T> {
    fn forward(&mut self, input: &Tensor<T>, _phase: &mut Phase<'_>) -> Result<Tensor<T>, NnError> {
        let out = input.map(elu);
        self.output = Some(out.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let out = self.output.take().ok_or(NnError::NoCache)?;
        if out.shape() != grad_output.shape() {
            return Err(NnError::Shape("elu grad".into()));
        }
        let data = out
            .data()
            .iter()
            .zip(grad_output.data())
            .map(|(&y, &g)| if y > T::zero() { g } else { g * (y + T::one()) })
            .collect();
        Tensor::from_vec(out.shape(), data)
    }

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        Ok(input.map(elu))
    }
}

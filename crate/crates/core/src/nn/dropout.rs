use rand::Rng;

use super::{Layer, NnError, Phase, Scalar, Tensor};

/// Inverted dropout: survivors are scaled by `1 / (1 − rate)` in training,
/// identity at inference.
#[derive(Debug, Clone)]
pub struct Dropout<T> {
    rate: f64,
    mask: Option<Vec<T>>,
}

impl<T: Scalar> Dropout<T> {
    pub fn new(rate: f64) -> Result<Self, NnError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NnError::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Self { rate, mask: None })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl<T: Scalar> Layer<T> for Dropout<T> {
    fn forward(&mut self, input: &Tensor<T>, phase: &mut Phase<'_>) -> Result<Tensor<T>, NnError> {
        match phase {
            Phase::Train(rng) if self.rate > 0.0 => {
                let keep = T::lit(1.0 / (1.0 - self.rate));
                // P(u32 < cut) = rate to within 2^-32
                let cut = (self.rate * 4_294_967_296.0).round() as u64;
                let mask: Vec<T> = (0..input.len())
                    .map(|_| if (rng.gen::<u32>() as u64) < cut { T::zero() } else { keep })
                    .collect();
                let data = input.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
                self.mask = Some(mask);
                Tensor::from_vec(input.shape(), data)
            }
            _ => {
                self.mask = None;
                Ok(input.clone())
            }
        }
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        match self.mask.take() {
            Some(mask) => {
                if mask.len() != grad_output.len() {
                    return Err(NnError::Shape("dropout grad".into()));
                }
                let data = grad_output.data().iter().zip(&mask).map(|(&g, &m)| g * m).collect();
                Tensor::from_vec(grad_output.shape(), data)
            }
            None => Ok(grad_output.clone()),
        }
    }

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        Ok(input.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NnRng;
    use rand::SeedableRng;

    #[test]
    fn zero_rate_and_eval_are_identity() {
        let x = Tensor::from_vec(&[5], vec![1.0f32, -2.0, 3.0, 0.5, 9.0]).unwrap();
        let mut rng = NnRng::seed_from_u64(1);
        let mut d0 = Dropout::new(0.0).unwrap();
        assert_eq!(d0.forward(&x, &mut Phase::Train(&mut rng)).unwrap(), x);
        let mut d = Dropout::new(0.7).unwrap();
        assert_eq!(d.forward(&x, &mut Phase::Eval).unwrap(), x);
        assert_eq!(d.infer(&x).unwrap(), x);
    }

    #[test]
    fn kept_fraction_matches_rate() {
        let n = 1_000_000;
        let x = Tensor::full(&[n], 1.0f64);
        let mut rng = NnRng::seed_from_u64(42);
        let mut d = Dropout::new(0.1).unwrap();
        let y = d.forward(&x, &mut Phase::Train(&mut rng)).unwrap();
        let kept = y.data().iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
        assert!((kept - 0.9).abs() < 0.002, "kept {kept}");
        let mean = y.data().iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn rate_must_be_below_one() {
        assert!(Dropout::<f32>::new(1.0).is_err());
        assert!(Dropout::<f32>::new(-0.1).is_err());
    }
}

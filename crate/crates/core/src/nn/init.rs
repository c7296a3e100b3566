use rand::Rng;

use super::{NnRng, Scalar, Tensor};

/// Uniform(−a, a) with a = sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform<T: Scalar>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut NnRng) -> Tensor<T> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len = shape.iter().product();
    let data = (0..len).map(|_| T::lit(rng.gen_range(-a..a))).collect();
    Tensor::from_vec(shape, data).expect("length matches shape")
}

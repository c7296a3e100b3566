use super::{Layer, NnError, Param, Phase, Scalar, Tensor};

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.99;

/// Per-channel batch normalization over `N×C×…` inputs.
///
/// Running statistics are an exponential moving average with momentum 0.99,
/// bias-corrected by `1 − momentum^t` so that early inference is not pulled
/// towards the zero-mean/unit-variance initial state.
#[derive(Debug, Clone)]
pub struct BatchNorm<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    running_mean: Vec<T>,
    running_var: Vec<T>,
    ema_mean: Vec<T>,
    ema_var: Vec<T>,
    stat_steps: u64,
    cache: Option<Cache<T>>,
}

#[derive(Debug, Clone)]
struct Cache<T> {
    normalized: Vec<T>,
    inv_std: Vec<T>,
    shape: Vec<usize>,
    batch_stats: bool,
}

fn layout(shape: &[usize]) -> Result<(usize, usize, usize), NnError> {
    if shape.len() < 2 {
        return Err(NnError::Shape(format!("batchnorm expects N×C×…, got {shape:?}")));
    }
    Ok((shape[0], shape[1], shape[2..].iter().product()))
}

const LANES: usize = 8;

/// `Σ f(x)` with independent partial sums so the loop vectorizes.
fn lane_sum<T: Scalar>(xs: &[T], f: impl Fn(T) -> T) -> T {
    let mut acc = [T::zero(); LANES];
    let mut chunks = xs.chunks_exact(LANES);
    for chunk in &mut chunks {
        for (a, &x) in acc.iter_mut().zip(chunk) {
            *a += f(x);
        }
    }
    let tail: T = chunks.remainder().iter().map(|&x| f(x)).sum();
    acc.iter().copied().sum::<T>() + tail
}

fn lane_dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); LANES];
    let mut ca = a.chunks_exact(LANES);
    let mut cb = b.chunks_exact(LANES);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..LANES {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: T = ca.remainder().iter().zip(cb.remainder()).map(|(&x, &y)| x * y).sum();
    acc.iter().copied().sum::<T>() + tail
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::new(Tensor::full(&[channels], T::one())),
            beta: Param::new(Tensor::zeros(&[channels])),
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            ema_mean: vec![T::zero(); channels],
            ema_var: vec![T::zero(); channels],
            stat_steps: 0,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }

    pub fn running_mean(&self) -> &[T] {
        &self.running_mean
    }

    pub fn running_var(&self) -> &[T] {
        &self.running_var
    }

    pub fn stat_steps(&self) -> u64 {
        self.stat_steps
    }

    /// Restores running statistics as saved by a checkpoint.
    pub fn set_running_stats(&mut self, mean: Vec<T>, var: Vec<T>, steps: u64) -> Result<(), NnError> {
        if mean.len() != self.channels() || var.len() != self.channels() {
            return Err(NnError::Shape("running statistics length".into()));
        }
        let debias = T::one() - T::lit(BN_MOMENTUM).powi(steps.min(i32::MAX as u64) as i32);
        self.ema_mean = mean.iter().map(|&m| m * debias).collect();
        self.ema_var = var.iter().map(|&v| v * debias).collect();
        self.running_mean = mean;
        self.running_var = var;
        self.stat_steps = steps;
        Ok(())
    }

    fn update_running(&mut self, mean: &[T], var_unbiased: &[T]) {
        let m = T::lit(BN_MOMENTUM);
        self.stat_steps += 1;
        let debias = T::one() - m.powi(self.stat_steps.min(i32::MAX as u64) as i32);
        for c in 0..self.channels() {
            self.ema_mean[c] = m * self.ema_mean[c] + (T::one() - m) * mean[c];
            self.ema_var[c] = m * self.ema_var[c] + (T::one() - m) * var_unbiased[c];
            self.running_mean[c] = self.ema_mean[c] / debias;
            self.running_var[c] = self.ema_var[c] / debias;
        }
    }

    fn apply(&self, input: &Tensor<T>, mean: &[T], inv_std: &[T], normalized: Option<&mut Vec<T>>) -> Tensor<T> {
        let (_, c, inner) = layout(input.shape()).expect("checked by caller");
        let g = self.gamma.value.data();
        let b = self.beta.value.data();
        let mut out = Vec::with_capacity(input.len());
        match normalized {
            Some(buf) => {
                buf.clear();
                buf.reserve(input.len());
                for (plane, xs) in input.data().chunks_exact(inner).enumerate() {
                    let ch = plane % c;
                    let (m, s) = (mean[ch], inv_std[ch]);
                    let start = buf.len();
                    buf.extend(xs.iter().map(|&x| (x - m) * s));
                    out.extend(buf[start..].iter().map(|&xh| g[ch] * xh + b[ch]));
                }
            }
            None => {
                for (plane, xs) in input.data().chunks_exact(inner).enumerate() {
                    let ch = plane % c;
                    let scale = g[ch] * inv_std[ch];
                    let shift = b[ch] - mean[ch] * scale;
                    out.extend(xs.iter().map(|&x| x * scale + shift));
                }
            }
        }
        Tensor::from_vec(input.shape(), out).expect("same length as input")
    }

    fn running_inv_std(&self) -> Vec<T> {
        self.running_var.iter().map(|&v| T::one() / (v + T::lit(BN_EPSILON)).sqrt()).collect()
    }

    fn check_channels(&self, input: &Tensor<T>) -> Result<(usize, usize, usize), NnError> {
        let dims = layout(input.shape())?;
        if dims.1 != self.channels() {
            return Err(NnError::Shape(format!(
                "batchnorm has {} channels, input {:?}",
                self.channels(),
                input.shape()
            )));
        }
        Ok(dims)
    }
}

impl<T: Scalar> Layer<T> for BatchNorm<T> {
    fn forward(&mut self, input: &Tensor<T>, phase: &mut Phase<'_>) -> Result<Tensor<T>, NnError> {
        let (n, c, inner) = self.check_channels(input)?;
        let mut normalized = Vec::new();
        if !phase.is_training() {
            let inv_std = self.running_inv_std();
            let out = self.apply(input, &self.running_mean.clone(), &inv_std, Some(&mut normalized));
            self.cache = Some(Cache { normalized, inv_std, shape: input.shape().to_vec(), batch_stats: false });
            return Ok(out);
        }
        let count = n * inner;
        if count < 2 {
            return Err(NnError::BatchTooSmall(count));
        }
        let cnt = T::from_usize(count).unwrap();
        let mut mean = vec![T::zero(); c];
        let mut var = vec![T::zero(); c];
        for (plane, xs) in input.data().chunks_exact(inner).enumerate() {
            mean[plane % c] += lane_sum(xs, |x| x);
        }
        mean.iter_mut().for_each(|m| *m /= cnt);
        for (plane, xs) in input.data().chunks_exact(inner).enumerate() {
            let m = mean[plane % c];
            var[plane % c] += lane_sum(xs, |x| (x - m) * (x - m));
        }
        let unbiased: Vec<T> = var.iter().map(|&v| v / (cnt - T::one())).collect();
        var.iter_mut().for_each(|v| *v /= cnt);
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + T::lit(BN_EPSILON)).sqrt()).collect();
        let out = self.apply(input, &mean, &inv_std, Some(&mut normalized));
        self.update_running(&mean, &unbiased);
        self.cache = Some(Cache { normalized, inv_std, shape: input.shape().to_vec(), batch_stats: true });
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let cache = self.cache.take().ok_or(NnError::NoCache)?;
        if grad_output.shape() != cache.shape.as_slice() {
            return Err(NnError::Shape(format!("batchnorm grad {:?}", grad_output.shape())));
        }
        let (n, c, inner) = layout(&cache.shape)?;
        let dy = grad_output.data();
        let xh = &cache.normalized;
        let mut sum_dy = vec![T::zero(); c];
        let mut sum_dy_xh = vec![T::zero(); c];
        for (plane, (d, x)) in dy.chunks_exact(inner).zip(xh.chunks_exact(inner)).enumerate() {
            sum_dy[plane % c] += lane_sum(d, |v| v);
            sum_dy_xh[plane % c] += lane_dot(d, x);
        }
        for ch in 0..c {
            self.gamma.grad.data_mut()[ch] += sum_dy_xh[ch];
            self.beta.grad.data_mut()[ch] += sum_dy[ch];
        }
        let g = self.gamma.value.data();
        let m = T::from_usize(n * inner).unwrap();
        let mut gi = Vec::with_capacity(dy.len());
        for (plane, (d, x)) in dy.chunks_exact(inner).zip(xh.chunks_exact(inner)).enumerate() {
            let ch = plane % c;
            let scale = g[ch] * cache.inv_std[ch];
            if cache.batch_stats {
                let mean_dy = sum_dy[ch] / m;
                let mean_dy_xh = sum_dy_xh[ch] / m;
                gi.extend(d.iter().zip(x).map(|(&dv, &xv)| scale * (dv - mean_dy - xv * mean_dy_xh)));
            } else {
                gi.extend(d.iter().map(|&dv| scale * dv));
            }
        }
        Tensor::from_vec(&cache.shape, gi)
    }

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.check_channels(input)?;
        Ok(self.apply(input, &self.running_mean, &self.running_inv_std(), None))
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.gamma, &mut self.beta]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NnRng;
    use rand::{Rng, SeedableRng};

    fn channel_stats(t: &Tensor<f64>, ch: usize) -> (f64, f64) {
        let s = t.shape();
        let (n, c, inner) = (s[0], s[1], s[2..].iter().product::<usize>());
        let vals: Vec<f64> = (0..n).flat_map(|i| t.data()[(i * c + ch) * inner..][..inner].to_vec()).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        (mean, var)
    }

    #[test]
    fn training_output_is_standardized() {
        let mut rng = NnRng::seed_from_u64(1);
        let x = Tensor::from_vec(&[4, 2, 3, 3], (0..72).map(|_| rng.gen_range(-5.0..9.0)).collect()).unwrap();
        let mut bn = BatchNorm::<f64>::new(2);
        let y = bn.forward(&x, &mut Phase::Train(&mut rng)).unwrap();
        for ch in 0..2 {
            let (m, v) = channel_stats(&y, ch);
            assert!(m.abs() < 1e-4);
            assert!((v - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn standardized_batch_is_nearly_unchanged() {
        // values ±1 per channel: mean 0, biased variance 1
        let x = Tensor::from_vec(&[2, 1, 1, 2], vec![1.0, -1.0, -1.0, 1.0]).unwrap();
        let mut bn = BatchNorm::<f64>::new(1);
        let mut rng = NnRng::seed_from_u64(0);
        let y = bn.forward(&x, &mut Phase::Train(&mut rng)).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn affine_parameters_apply_after_normalization() {
        let x = Tensor::from_vec(&[2, 1, 1, 2], vec![1.0, -1.0, -1.0, 1.0]).unwrap();
        let mut bn = BatchNorm::<f64>::new(1);
        bn.gamma.value = Tensor::full(&[1], 2.0);
        bn.beta.value = Tensor::full(&[1], 3.0);
        let mut rng = NnRng::seed_from_u64(0);
        let y = bn.forward(&x, &mut Phase::Train(&mut rng)).unwrap();
        let xh = 1.0 / (1.0 + BN_EPSILON).sqrt();
        let expected = [2.0 * xh + 3.0, -2.0 * xh + 3.0, -2.0 * xh + 3.0, 2.0 * xh + 3.0];
        for (a, b) in y.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn first_update_makes_running_stats_equal_batch_stats() {
        let x = Tensor::from_vec(&[1, 1, 1, 4], vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        let mut bn = BatchNorm::<f64>::new(1);
        let mut rng = NnRng::seed_from_u64(0);
        bn.forward(&x, &mut Phase::Train(&mut rng)).unwrap();
        assert!((bn.running_mean()[0] - 3.0).abs() < 1e-12);
        // unbiased variance of (1,2,3,6) = 14/3
        assert!((bn.running_var()[0] - 14.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn too_small_batch_is_rejected_in_training() {
        let mut bn = BatchNorm::<f32>::new(3);
        let mut rng = NnRng::seed_from_u64(0);
        let x = Tensor::zeros(&[1, 3, 1, 1]);
        assert_eq!(bn.forward(&x, &mut Phase::Train(&mut rng)).unwrap_err(), NnError::BatchTooSmall(1));
        assert!(bn.forward(&x, &mut Phase::Eval).is_ok());
    }
}

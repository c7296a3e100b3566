use super::{expect_rank, glorot_uniform, matmul, matmul_at, matmul_bt, Layer, NnError, NnRng, Param, Phase, Scalar, Tensor};

/// Stride-1 2-D cross-correlation with "same" zero padding.
///
/// Input `N×C_in×H×W`, kernels `C_out×C_in×k×k` (odd `k`), output `N×C_out×H×W`.
/// Lowered to GEMM through an im2col buffer that is rebuilt in backward rather
/// than cached.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    input_grad: bool,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut NnRng) -> Self {
        assert!(kernel % 2 == 1, "kernel size must be odd");
        let area = kernel * kernel;
        let weight = glorot_uniform(
            &[out_channels, in_channels, kernel, kernel],
            in_channels * area,
            out_channels * area,
            rng,
        );
        Self::from_params(weight, Tensor::zeros(&[out_channels]))
    }

    pub fn from_params(weight: Tensor<T>, bias: Tensor<T>) -> Self {
        let s = weight.shape().to_vec();
        assert_eq!(s.len(), 4, "conv weight must be rank 4");
        assert_eq!(s[2], s[3], "conv kernel must be square");
        assert_eq!(bias.len(), s[0], "one bias per output channel");
        Self {
            in_channels: s[1],
            out_channels: s[0],
            kernel: s[2],
            weight: Param::new(weight),
            bias: Param::new(bias),
            input_grad: true,
            cache: None,
        }
    }

    /// Disables the input-gradient GEMM (first layer of a network).
    pub fn without_input_grad(mut self) -> Self {
        self.input_grad = false;
        self
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    fn check(&self, input: &Tensor<T>) -> Result<(usize, usize, usize), NnError> {
        expect_rank(input, 4, "conv2d")?;
        let s = input.shape();
        if s[1] != self.in_channels {
            return Err(NnError::Shape(format!(
                "conv2d expects {} input channels, got {}",
                self.in_channels, s[1]
            )));
        }
        Ok((s[0], s[2], s[3]))
    }

    fn im2col(&self, image: &[T], h: usize, w: usize, col: &mut [T]) {
        let k = self.kernel;
        let pad = (k / 2) as isize;
        let hw = h * w;
        for c in 0..self.in_channels {
            let plane = &image[c * hw..(c + 1) * hw];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &mut col[((c * k + ky) * k + kx) * hw..][..hw];
                    let dy = ky as isize - pad;
                    let dx = kx as isize - pad;
                    for y in 0..h {
                        let out = &mut row[y * w..(y + 1) * w];
                        let sy = y as isize + dy;
                        if sy < 0 || sy >= h as isize {
                            out.fill(T::zero());
                            continue;
                        }
                        let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                        let x0 = (-dx).max(0) as usize;
                        let x1 = (w as isize - dx.max(0)) as usize;
                        out[..x0.min(w)].fill(T::zero());
                        if x1 > x0 {
                            let s0 = (x0 as isize + dx) as usize;
                            out[x0..x1].copy_from_slice(&src[s0..s0 + (x1 - x0)]);
                        }
                        out[x1.max(x0).min(w)..].fill(T::zero());
                    }
                }
            }
        }
    }

    fn col2im(&self, col: &[T], h: usize, w: usize, image: &mut [T]) {
        let k = self.kernel;
        let pad = (k / 2) as isize;
        let hw = h * w;
        for c in 0..self.in_channels {
            let plane = &mut image[c * hw..(c + 1) * hw];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &col[((c * k + ky) * k + kx) * hw..][..hw];
                    let dy = ky as isize - pad;
                    let dx = kx as isize - pad;
                    for y in 0..h {
                        let sy = y as isize + dy;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let x0 = (-dx).max(0) as usize;
                        let x1 = (w as isize - dx.max(0)) as usize;
                        if x1 <= x0 {
                            continue;
                        }
                        let s0 = (x0 as isize + dx) as usize;
                        let dst = &mut plane[sy as usize * w + s0..][..x1 - x0];
                        for (d, &g) in dst.iter_mut().zip(&row[y * w + x0..y * w + x1]) {
                            *d += g;
                        }
                    }
                }
            }
        }
    }

    fn run(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let (n, h, w) = self.check(input)?;
        let hw = h * w;
        let kdim = self.in_channels * self.kernel * self.kernel;
        let mut out = Tensor::zeros(&[n, self.out_channels, h, w]);
        let mut col = vec![T::zero(); kdim * hw];
        let bias = self.bias.value.data();
        for i in 0..n {
            self.im2col(input.outer(i), h, w, &mut col);
            let o = out.outer_mut(i);
            for (c, &b) in bias.iter().enumerate() {
                o[c * hw..(c + 1) * hw].fill(b);
            }
            matmul(self.out_channels, kdim, hw, self.weight.value.data(), &col, o, true);
        }
        Ok(out)
    }
}

impl<T: Scalar> Layer<T> for Conv2d<T> {
    fn forward(&mut self, input: &Tensor<T>, _phase: &mut Phase<'_>) -> Result<Tensor<T>, NnError> {
        let out = self.run(input)?;
        self.cache = Some(input.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let input = self.cache.take().ok_or(NnError::NoCache)?;
        let (n, h, w) = self.check(&input)?;
        if grad_output.shape() != [n, self.out_channels, h, w] {
            return Err(NnError::Shape(format!("conv2d grad {:?}", grad_output.shape())));
        }
        let hw = h * w;
        let kdim = self.in_channels * self.kernel * self.kernel;
        let mut col = vec![T::zero(); kdim * hw];
        let mut dcol = vec![T::zero(); kdim * hw];
        let mut grad_input = Tensor::zeros(input.shape());
        for i in 0..n {
            let dy = grad_output.outer(i);
            self.im2col(input.outer(i), h, w, &mut col);
            matmul_bt(self.out_channels, hw, kdim, dy, &col, self.weight.grad.data_mut(), true);
            for (c, db) in self.bias.grad.data_mut().iter_mut().enumerate() {
                *db += dy[c * hw..(c + 1) * hw].iter().copied().sum::<T>();
            }
            if self.input_grad {
                matmul_at(kdim, self.out_channels, hw, self.weight.value.data(), dy, &mut dcol, false);
                self.col2im(&dcol, h, w, grad_input.outer_mut(i));
            }
        }
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

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn naive(conv: &Conv2d<f64>, input: &Tensor<f64>) -> Vec<f64> {
        let s = input.shape();
        let (n, cin, h, w) = (s[0], s[1], s[2], s[3]);
        let cout = conv.out_channels;
        let wt = conv.weight.value.data();
        let mut out = vec![0.0; n * cout * h * w];
        for b in 0..n {
            for co in 0..cout {
                for y in 0..h {
                    for x in 0..w {
                        let mut acc = conv.bias.value.data()[co];
                        for ci in 0..cin {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let sy = y as isize + ky as isize - 1;
                                    let sx = x as isize + kx as isize - 1;
                                    if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                        continue;
                                    }
                                    acc += wt[((co * cin + ci) * 3 + ky) * 3 + kx]
                                        * input.data()[((b * cin + ci) * h + sy as usize) * w + sx as usize];
                                }
                            }
                        }
                        out[((b * cout + co) * h + y) * w + x] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let mut k = vec![0.0f64; 9];
        k[4] = 1.0;
        let conv = Conv2d::from_params(Tensor::from_vec(&[1, 1, 3, 3], k).unwrap(), Tensor::zeros(&[1]));
        let x = Tensor::from_vec(&[1, 1, 3, 4], (0..12).map(|i| i as f64 - 3.5).collect()).unwrap();
        assert_eq!(conv.infer(&x).unwrap(), x);
    }

    #[test]
    fn ones_kernel_counts_neighbours() {
        let conv = Conv2d::from_params(Tensor::full(&[1, 1, 3, 3], 1.0f64), Tensor::zeros(&[1]));
        let y = conv.infer(&Tensor::full(&[1, 1, 3, 3], 1.0)).unwrap();
        assert_eq!(y.data()[4], 9.0);
        for corner in [0, 2, 6, 8] {
            assert_eq!(y.data()[corner], 4.0);
        }
        assert_eq!(y.data()[1], 6.0);
    }

    #[test]
    fn matches_direct_convolution_and_shape() {
        let mut rng = NnRng::seed_from_u64(3);
        let mut conv = Conv2d::<f64>::new(3, 5, 3, &mut rng);
        conv.bias.value = glorot_uniform(&[5], 1, 1, &mut rng);
        let x = glorot_uniform(&[2, 3, 4, 7], 1, 1, &mut rng);
        let y = conv.infer(&x).unwrap();
        assert_eq!(y.shape(), &[2, 5, 4, 7]);
        for (a, b) in y.data().iter().zip(naive(&conv, &x)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_channel_mismatch() {
        let mut rng = NnRng::seed_from_u64(0);
        let conv = Conv2d::<f32>::new(2, 4, 3, &mut rng);
        assert!(matches!(conv.infer(&Tensor::zeros(&[1, 3, 4, 4])), Err(NnError::Shape(_))));
    }
}

use super::activation::sigmoid;
use super::{expect_rank, glorot_uniform, matmul, matmul_at, matmul_bt, Layer, NnError, NnRng, Param, Phase, Scalar, Tensor};

/// Gated recurrent unit over `N×T×D` sequences, producing `N×T×H`.
///
/// ```text
/// z = σ(W_z x + U_z h + b_z)
/// r = σ(W_r x + U_r h + b_r)
/// ĥ = tanh(W_h x + U_h (r ⊙ h) + b_h)
/// h' = (1 − z) ⊙ h + z ⊙ ĥ
/// ```
///
/// `W` is stored `3H×D` and `U` is `3H×H`, gate blocks in the order z, r, h.
/// The initial state is zero.
#[derive(Debug, Clone)]
pub struct Gru<T> {
    pub w: Param<T>,
    pub u: Param<T>,
    pub b: Param<T>,
    hidden: usize,
    cache: Option<GruCache<T>>,
}

#[derive(Debug, Clone)]
struct GruCache<T> {
    input: Tensor<T>,
    // per time step, each N×H
    h_prev: Vec<Vec<T>>,
    z: Vec<Vec<T>>,
    r: Vec<Vec<T>>,
    cand: Vec<Vec<T>>,
    rh: Vec<Vec<T>>,
}

struct StepOut<T> {
    z: Vec<T>,
    r: Vec<T>,
    cand: Vec<T>,
    rh: Vec<T>,
    h: Vec<T>,
}

impl<T: Scalar> Gru<T> {
    pub fn new(inputs: usize, hidden: usize, rng: &mut NnRng) -> Self {
        let mut w = Vec::with_capacity(3 * hidden * inputs);
        let mut u = Vec::with_capacity(3 * hidden * hidden);
        for _ in 0..3 {
            w.extend(glorot_uniform::<T>(&[hidden, inputs], inputs, hidden, rng).into_data());
        }
        for _ in 0..3 {
            u.extend(glorot_uniform::<T>(&[hidden, hidden], hidden, hidden, rng).into_data());
        }
        Self::from_params(
            Tensor::from_vec(&[3 * hidden, inputs], w).expect("sized"),
            Tensor::from_vec(&[3 * hidden, hidden], u).expect("sized"),
            Tensor::zeros(&[3 * hidden]),
        )
    }

    pub fn from_params(w: Tensor<T>, u: Tensor<T>, b: Tensor<T>) -> Self {
        let hidden = u.dim(1);
        assert_eq!(w.dim(0), 3 * hidden, "W must be 3H×D");
        assert_eq!(u.shape(), [3 * hidden, hidden], "U must be 3H×H");
        assert_eq!(b.len(), 3 * hidden, "b must have 3H entries");
        Self { w: Param::new(w), u: Param::new(u), b: Param::new(b), hidden, cache: None }
    }

    pub fn inputs(&self) -> usize {
        self.w.value.dim(1)
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn check(&self, input: &Tensor<T>) -> Result<(usize, usize, usize), NnError> {
        expect_rank(input, 3, "gru")?;
        let s = input.shape();
        if s[2] != self.inputs() {
            return Err(NnError::Shape(format!("gru expects input dim {}, got {}", self.inputs(), s[2])));
        }
        Ok((s[0], s[1], s[2]))
    }

    /// Input projections for every (n, t): `NT×3H` including the bias.
    fn project(&self, input: &Tensor<T>) -> Vec<T> {
        let (n, t, d) = (input.dim(0), input.dim(1), input.dim(2));
        let g = 3 * self.hidden;
        let mut xw = vec![T::zero(); n * t * g];
        for row in xw.chunks_mut(g) {
            row.copy_from_slice(self.b.value.data());
        }
        matmul_bt(n * t, d, g, input.data(), self.w.value.data(), &mut xw, true);
        xw
    }

    fn step(&self, xw: &[T], n: usize, t: usize, steps: usize, h_prev: &[T]) -> StepOut<T> {
        let hd = self.hidden;
        let g = 3 * hd;
        let u = self.u.value.data();
        let mut hu = vec![T::zero(); n * 2 * hd];
        matmul_bt(n, hd, 2 * hd, h_prev, &u[..2 * hd * hd], &mut hu, false);
        let mut z = vec![T::zero(); n * hd];
        let mut r = vec![T::zero(); n * hd];
        for i in 0..n {
            let x = &xw[(i * steps + t) * g..][..g];
            for j in 0..hd {
                z[i * hd + j] = sigmoid(x[j] + hu[i * 2 * hd + j]);
                r[i * hd + j] = sigmoid(x[hd + j] + hu[i * 2 * hd + hd + j]);
            }
        }
        let rh: Vec<T> = r.iter().zip(h_prev).map(|(&a, &b)| a * b).collect();
        let mut cand = vec![T::zero(); n * hd];
        matmul_bt(n, hd, hd, &rh, &u[2 * hd * hd..], &mut cand, false);
        let mut h = vec![T::zero(); n * hd];
        for i in 0..n {
            let x = &xw[(i * steps + t) * g + 2 * hd..][..hd];
            for j in 0..hd {
                let k = i * hd + j;
                cand[k] = (cand[k] + x[j]).tanh();
                h[k] = (T::one() - z[k]) * h_prev[k] + z[k] * cand[k];
            }
        }
        StepOut { z, r, cand, rh, h }
    }

    fn run(&self, input: &Tensor<T>, mut cache: Option<&mut GruCache<T>>) -> Result<Tensor<T>, NnError> {
        let (n, steps, _) = self.check(input)?;
        let hd = self.hidden;
        let xw = self.project(input);
        let mut out = Tensor::zeros(&[n, steps, hd]);
        let mut h = vec![T::zero(); n * hd];
        for t in 0..steps {
            let s = self.step(&xw, n, t, steps, &h);
            for i in 0..n {
                out.data_mut()[(i * steps + t) * hd..][..hd].copy_from_slice(&s.h[i * hd..(i + 1) * hd]);
            }
            let next = s.h;
            if let Some(c) = cache.as_deref_mut() {
                c.h_prev.push(std::mem::replace(&mut h, next));
                c.z.push(s.z);
                c.r.push(s.r);
                c.cand.push(s.cand);
                c.rh.push(s.rh);
            } else {
                h = next;
            }
        }
        Ok(out)
    }
}

impl<T: Scalar> Layer<T> for Gru<T> {
    fn forward(&mut self, input: &Tensor<T>, _phase: &mut Phase<'_>) -> Result<Tensor<T>, NnError> {
        let mut cache = GruCache {
            input: input.clone(),
            h_prev: Vec::new(),
            z: Vec::new(),
            r: Vec::new(),
            cand: Vec::new(),
            rh: Vec::new(),
        };
        let out = self.run(input, Some(&mut cache))?;
        self.cache = Some(cache);
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let cache = self.cache.take().ok_or(NnError::NoCache)?;
        let (n, steps, d) = (cache.input.dim(0), cache.input.dim(1), cache.input.dim(2));
        let hd = self.hidden;
        let g = 3 * hd;
        if grad_output.shape() != [n, steps, hd] {
            return Err(NnError::Shape(format!("gru grad {:?}", grad_output.shape())));
        }
        let u = self.u.value.data().to_vec();
        let mut dxw = vec![T::zero(); n * steps * g];
        let mut dh_next = vec![T::zero(); n * hd];
        let mut da_zr = vec![T::zero(); n * 2 * hd];
        let mut da_h = vec![T::zero(); n * hd];
        let mut drh = vec![T::zero(); n * hd];
        let mut dh_zr = vec![T::zero(); n * hd];
        for t in (0..steps).rev() {
            let (hp, z, r, cand, rh) = (&cache.h_prev[t], &cache.z[t], &cache.r[t], &cache.cand[t], &cache.rh[t]);
            let mut dh_prev = vec![T::zero(); n * hd];
            for i in 0..n {
                for j in 0..hd {
                    let k = i * hd + j;
                    let dh = grad_output.data()[(i * steps + t) * hd + j] + dh_next[k];
                    let dcand = dh * z[k];
                    let dz = dh * (cand[k] - hp[k]);
                    dh_prev[k] = dh * (T::one() - z[k]);
                    da_h[k] = dcand * (T::one() - cand[k] * cand[k]);
                    da_zr[i * 2 * hd + j] = dz * z[k] * (T::one() - z[k]);
                }
            }
            // candidate path through U_h (r ⊙ h)
            matmul(n, hd, hd, &da_h, &u[2 * hd * hd..], &mut drh, false);
            matmul_at(hd, n, hd, &da_h, rh, &mut self.u.grad.data_mut()[2 * hd * hd..], true);
            for i in 0..n {
                for j in 0..hd {
                    let k = i * hd + j;
                    dh_prev[k] += drh[k] * r[k];
                    let dr = drh[k] * hp[k];
                    da_zr[i * 2 * hd + hd + j] = dr * r[k] * (T::one() - r[k]);
                }
            }
            matmul(n, 2 * hd, hd, &da_zr, &u[..2 * hd * hd], &mut dh_zr, false);
            matmul_at(2 * hd, n, hd, &da_zr, hp, &mut self.u.grad.data_mut()[..2 * hd * hd], true);
            for (a, &b) in dh_prev.iter_mut().zip(&dh_zr) {
                *a += b;
            }
            for i in 0..n {
                let row = &mut dxw[(i * steps + t) * g..][..g];
                row[..2 * hd].copy_from_slice(&da_zr[i * 2 * hd..(i + 1) * 2 * hd]);
                row[2 * hd..].copy_from_slice(&da_h[i * hd..(i + 1) * hd]);
            }
            dh_next = dh_prev;
        }
        matmul_at(g, n * steps, d, &dxw, cache.input.data(), self.w.grad.data_mut(), true);
        for row in dxw.chunks(g) {
            for (b, &v) in self.b.grad.data_mut().iter_mut().zip(row) {
                *b += v;
            }
        }
        let mut grad_input = Tensor::zeros(&[n, steps, d]);
        matmul(n * steps, g, d, &dxw, self.w.value.data(), grad_input.data_mut(), false);
        Ok(grad_input)
    }

    fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.run(input, None)
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.w, &self.u, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.w, &mut self.u, &mut self.b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_parameters_keep_zero_state() {
        let gru = Gru::from_params(Tensor::zeros(&[6, 3]), Tensor::zeros(&[6, 2]), Tensor::zeros(&[6]));
        let x = Tensor::from_vec(&[1, 4, 3], (0..12).map(|i| i as f64).collect()).unwrap();
        let y = gru.infer(&x).unwrap();
        assert_eq!(y.shape(), &[1, 4, 2]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_single_step_matches_hand_computation() {
        // W = (wz, wr, wh), U = (uz, ur, uh), b = (bz, br, bh), h0 = 0
        let (wz, wr, wh) = (0.5, -0.3, 0.8);
        let (bz, br, bh) = (0.1, 0.2, -0.4);
        let gru = Gru::from_params(
            Tensor::from_vec(&[3, 1], vec![wz, wr, wh]).unwrap(),
            Tensor::from_vec(&[3, 1], vec![0.7, 0.9, -1.1]).unwrap(),
            Tensor::from_vec(&[3], vec![bz, br, bh]).unwrap(),
        );
        let x = 2.0f64;
        let y = gru.infer(&Tensor::from_vec(&[1, 1, 1], vec![x]).unwrap()).unwrap();
        let z = 1.0 / (1.0 + (-(wz * x + bz)).exp());
        let cand = (wh * x + bh).tanh();
        assert!((y.data()[0] - z * cand).abs() < 1e-15);

        // second step exercises U and the reset gate
        let y2 = gru.infer(&Tensor::from_vec(&[1, 2, 1], vec![x, -1.0]).unwrap()).unwrap();
        let h1 = z * cand;
        let z2 = 1.0 / (1.0 + (-(wz * -1.0 + 0.7 * h1 + bz)).exp());
        let r2 = 1.0 / (1.0 + (-(wr * -1.0 + 0.9 * h1 + br)).exp());
        let c2 = (wh * -1.0 + -1.1 * (r2 * h1) + bh).tanh();
        let h2 = (1.0 - z2) * h1 + z2 * c2;
        assert!((y2.data()[0] - h1).abs() < 1e-15);
        assert!((y2.data()[1] - h2).abs() < 1e-15);
    }

    #[test]
    fn output_length_matches_input_and_dims_checked() {
        let mut rng = NnRng::seed_from_u64(2);
        let gru = Gru::<f32>::new(5, 4, &mut rng);
        assert_eq!(gru.infer(&Tensor::zeros(&[3, 7, 5])).unwrap().shape(), &[3, 7, 4]);
        assert!(gru.infer(&Tensor::zeros(&[3, 7, 6])).is_err());
    }
}

//! Finite-difference verification of backward passes.
//!
//! The scalar objective is `Σ y ⊙ R` for a fixed random projection `R`, so
//! every output element contributes to the checked gradients.

use rand::{Rng, SeedableRng};

use super::{Layer, NnError, NnRng, Phase, Tensor};

const PROJECTION_SEED: u64 = 0x5eed;
const PHASE_SEED: u64 = 17;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic − numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_error: f64,
    /// Where the largest error occurred, e.g. `input[3]` or `param1[12]`.
    pub worst: String,
    pub checked: usize,
}

/// Denominator floor for the relative error; gradients smaller than this are
/// compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

/// Errors above this trigger re-estimation with smaller steps.
pub const RETRY_ABOVE: f64 = 1e-7;

fn objective(layer: &mut dyn Layer<f64>, input: &Tensor<f64>, projection: &[f64], training: bool) -> Result<f64, NnError> {
    let mut rng = NnRng::seed_from_u64(PHASE_SEED);
    let mut phase = if training { Phase::Train(&mut rng) } else { Phase::Eval };
    let out = layer.forward(input, &mut phase)?;
    Ok(out.data().iter().zip(projection).map(|(a, b)| a * b).sum())
}

/// Compares analytic gradients against central differences `(f(x+ε) − f(x−ε)) / 2ε`
/// for every input element and every parameter element.
///
/// With `training` set, each evaluation reuses one fixed rng seed, so dropout
/// masks repeat and batch norm uses batch statistics deterministically.
pub fn grad_check(layer: &mut dyn Layer<f64>, input: &Tensor<f64>, eps: f64, training: bool) -> Result<GradCheckReport, NnError> {
    let mut rng = NnRng::seed_from_u64(PHASE_SEED);
    let out = {
        let mut phase = if training { Phase::Train(&mut rng) } else { Phase::Eval };
        layer.forward(input, &mut phase)?
    };
    let mut prng = NnRng::seed_from_u64(PROJECTION_SEED);
    let projection: Vec<f64> = (0..out.len()).map(|_| prng.gen_range(-1.0..1.0)).collect();
    layer.zero_grad();
    let grad_out = Tensor::from_vec(out.shape(), projection.clone())?;
    let grad_in = layer.backward(&grad_out)?;
    let param_grads: Vec<Vec<f64>> = layer.params().iter().map(|p| p.grad.data().to_vec()).collect();

    let mut report = GradCheckReport { max_rel_error: 0.0, worst: String::new(), checked: 0 };
    let mut record = |rel: f64, at: String| {
        report.checked += 1;
        if rel >= report.max_rel_error {
            report.max_rel_error = rel;
            report.worst = at;
        }
    };

    let mut x = input.clone();
    for k in 0..x.len() {
        let orig = x.data()[k];
        let rel = refine(grad_in.data()[k], eps, |h| {
            x.data_mut()[k] = orig + h;
            let plus = objective(layer, &x, &projection, training);
            x.data_mut()[k] = orig - h;
            let minus = objective(layer, &x, &projection, training);
            x.data_mut()[k] = orig;
            Ok((plus? - minus?) / (2.0 * h))
        })?;
        record(rel, format!("input[{k}]"));
    }

    for (pi, analytic) in param_grads.iter().enumerate() {
        for k in 0..analytic.len() {
            let orig = layer.params()[pi].value.data()[k];
            let rel = refine(analytic[k], eps, |h| {
                layer.params_mut()[pi].value.data_mut()[k] = orig + h;
                let plus = objective(layer, input, &projection, training);
                layer.params_mut()[pi].value.data_mut()[k] = orig - h;
                let minus = objective(layer, input, &projection, training);
                layer.params_mut()[pi].value.data_mut()[k] = orig;
                Ok((plus? - minus?) / (2.0 * h))
            })?;
            record(rel, format!("param{pi}[{k}]"));
        }
    }
    Ok(report)
}

/// Relative error against the central difference at `eps`, re-estimated at
/// `eps / 10` and `eps / 100` when it exceeds [`RETRY_ABOVE`]. A step that
/// straddles a kink (a max-pool switch, ELU at 0) disagrees only at that step;
/// a wrong analytic gradient disagrees at all of them. The smallest error wins.
fn refine(analytic: f64, eps: f64, mut numeric: impl FnMut(f64) -> Result<f64, NnError>) -> Result<f64, NnError> {
    let mut best = f64::INFINITY;
    let mut h = eps;
    for _ in 0..3 {
        let n = numeric(h)?;
        let rel = (analytic - n).abs() / analytic.abs().max(n.abs()).max(REL_FLOOR);
        best = best.min(rel);
        if best <= RETRY_ABOVE {
            break;
        }
        h /= 10.0;
    }
    Ok(best)
}

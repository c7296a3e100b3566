//! Cross-entropy objectives, summed over the batch.

use super::activation::{sigmoid, softmax};
use super::{expect_rank, NnError, Scalar, Tensor};

pub const PROB_FLOOR: f64 = 1e-12;

fn clamp_prob<T: Scalar>(p: T) -> T {
    p.max(T::lit(PROB_FLOOR)).min(T::one())
}

/// `L = −Σ_i Σ_j y_ij ln ŷ_ij` with `ŷ` clamped to `[1e-12, 1]`.
///
/// Returns the loss and `∂L/∂ŷ`.
pub fn cross_entropy<T: Scalar>(targets: &Tensor<T>, predictions: &Tensor<T>) -> Result<(T, Tensor<T>), NnError> {
    expect_rank(predictions, 2, "cross_entropy")?;
    if targets.shape() != predictions.shape() {
        return Err(NnError::Shape(format!(
            "targets {:?} vs predictions {:?}",
            targets.shape(),
            predictions.shape()
        )));
    }
    let mut loss = T::zero();
    let mut grad = Tensor::zeros(predictions.shape());
    for ((&y, &p), g) in targets.data().iter().zip(predictions.data()).zip(grad.data_mut()) {
        let pc = clamp_prob(p);
        loss -= y * pc.ln();
        *g = -y / pc;
    }
    Ok((loss, grad))
}

fn check_labels<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(usize, usize), NnError> {
    expect_rank(logits, 2, "loss")?;
    let (n, c) = (logits.dim(0), logits.dim(1));
    if labels.len() != n {
        return Err(NnError::Shape(format!("{} labels for batch of {n}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(NnError::Shape(format!("label {bad} outside {c} classes")));
    }
    Ok((n, c))
}

/// Softmax head fused with categorical cross-entropy.
///
/// Returns the loss, the probabilities, and the gradient with respect to the
/// logits (`p − y`).
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>, Tensor<T>), NnError> {
    let (n, c) = check_labels(logits, labels)?;
    let mut probs = Tensor::zeros(&[n, c]);
    let mut loss = T::zero();
    for (i, &label) in labels.iter().enumerate() {
        let p = softmax(logits.outer(i));
        loss -= clamp_prob(p[label]).ln();
        probs.outer_mut(i).copy_from_slice(&p);
    }
    let mut grad = probs.clone();
    for (i, &label) in labels.iter().enumerate() {
        grad.outer_mut(i)[label] -= T::one();
    }
    Ok((loss, probs, grad))
}

/// Per-class sigmoid head fused with the cross-entropy of each class's
/// two-outcome distribution `{ŷ, 1 − ŷ}` against the one-hot target.
///
/// Returns the loss, the activations, and the gradient with respect to the
/// logits (`σ(x) − y`).
pub fn sigmoid_binary_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(T, Tensor<T>, Tensor<T>), NnError> {
    let (_, c) = check_labels(logits, labels)?;
    let probs = logits.map(sigmoid);
    let mut grad = probs.clone();
    let mut loss = T::zero();
    for (i, &label) in labels.iter().enumerate() {
        for j in 0..c {
            let p = probs.data()[i * c + j];
            if j == label {
                loss -= clamp_prob(p).ln();
                grad.data_mut()[i * c + j] -= T::one();
            } else {
                loss -= clamp_prob(T::one() - p).ln();
            }
        }
    }
    Ok((loss, probs, grad))
}

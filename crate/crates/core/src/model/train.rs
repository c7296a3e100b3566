use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Head, ModelError, RcnnModel};
use crate::nn::{sigmoid_binary_cross_entropy, softmax_cross_entropy, Adam, AdamConfig, Layer, NnError, Phase};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    /// Clamped to the dataset size.
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Stop after the first epoch whose held-out accuracy reaches this value.
    pub target_accuracy: Option<f64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { epochs: 20, batch_size: 128, seed: 0, adam: AdamConfig::default(), target_accuracy: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-sample loss over the epoch.
    pub loss: f64,
    pub train_accuracy: f64,
    pub heldout_accuracy: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub wall_clock_seconds: f64,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn final_heldout_accuracy(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.heldout_accuracy)
    }

    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }
}

/// Fraction of rows whose first maximal entry sits at the label.
pub fn accuracy(predictions: &[Vec<f32>], labels: &[usize]) -> f64 {
    assert_eq!(predictions.len(), labels.len(), "one prediction per label");
    if labels.is_empty() {
        return 0.0;
    }
    let correct = predictions.iter().zip(labels).filter(|(p, &l)| argmax(p) == l).count();
    correct as f64 / labels.len() as f64
}

fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Content-derived order, so the seeded shuffle is the only order dependence.
fn canonical_order(data: &Dataset) -> Vec<usize> {
    let mut keyed: Vec<(usize, u32, usize)> = data
        .items()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut h = crc32fast::Hasher::new();
            for v in s.features.values() {
                h.update(&v.to_bits().to_le_bytes());
            }
            (s.label, h.finalize(), i)
        })
        .collect();
    keyed.sort_by_key(|&(label, hash, _)| (label, hash));
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

impl RcnnModel {
    /// Mini-batch Adam on the summed per-sample loss of the configured head.
    pub fn train(&mut self, data: &Dataset, heldout: Option<&Dataset>, opts: &TrainOptions) -> Result<TrainReport, ModelError> {
        if data.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        let c = self.config.n_classes;
        if let Some(&label) = data.labels().iter().find(|&&l| l >= c) {
            return Err(ModelError::Label { label, n_classes: c });
        }
        if opts.batch_size == 0 {
            return Err(ModelError::Config("batch size must be positive".into()));
        }
        let batch_size = opts.batch_size.min(data.len());
        let mut order = canonical_order(data);
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut dropout_rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
        let mut adam = Adam::new(opts.adam);
        let started = Instant::now();
        let mut report = TrainReport { epochs: Vec::new(), wall_clock_seconds: 0.0, stopped_early: false };

        for epoch in 1..=opts.epochs {
            let epoch_start = Instant::now();
            order.shuffle(&mut shuffle_rng);
            let (mut loss_sum, mut correct) = (0.0f64, 0usize);
            for (b, batch) in order.chunks(batch_size).enumerate() {
                let input = self.stack(batch.iter().map(|&i| &data.items()[i].features))?;
                let labels: Vec<usize> = batch.iter().map(|&i| data.items()[i].label).collect();
                self.net.zero_grad();
                let logits = self.net.forward(&input, &mut Phase::Train(&mut dropout_rng))?;
                let (loss, probs, grad) = match self.config.head {
                    Head::Sigmoid => sigmoid_binary_cross_entropy(&logits, &labels)?,
                    Head::Softmax => softmax_cross_entropy(&logits, &labels)?,
                };
                if !loss.is_finite() {
                    return Err(ModelError::NonFiniteLoss { epoch, batch: b });
                }
                loss_sum += loss as f64;
                correct += labels
                    .iter()
                    .enumerate()
                    .filter(|(i, &l)| argmax(probs.outer(*i)) == l)
                    .count();
                self.net.backward(&grad)?;
                match adam.step(&mut self.net.params_mut()) {
                    Ok(()) => self.steps += 1,
                    Err(NnError::NonFiniteGradient(_)) => return Err(ModelError::NonFiniteLoss { epoch, batch: b }),
                    Err(e) => return Err(e.into()),
                }
            }
            let heldout_accuracy = match heldout {
                Some(h) if !h.is_empty() => Some(self.evaluate(h)?),
                _ => None,
            };
            let stats = EpochStats {
                epoch,
                loss: loss_sum / data.len() as f64,
                train_accuracy: correct as f64 / data.len() as f64,
                heldout_accuracy,
                seconds: epoch_start.elapsed().as_secs_f64(),
            };
            log::info!(
                "epoch {epoch}: loss {:.4} train acc {:.4} held-out acc {} ({:.1} s)",
                stats.loss,
                stats.train_accuracy,
                heldout_accuracy.map_or("-".to_string(), |a| format!("{a:.4}")),
                stats.seconds
            );
            report.epochs.push(stats);
            if let (Some(target), Some(acc)) = (opts.target_accuracy, heldout_accuracy) {
                if acc >= target {
                    report.stopped_early = epoch < opts.epochs;
                    break;
                }
            }
        }
        report.wall_clock_seconds = started.elapsed().as_secs_f64();
        Ok(report)
    }
}

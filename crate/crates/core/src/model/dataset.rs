use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ModelError;
use crate::audio::{AudioBuffer, ANALYSIS_RATE, SEGMENT_SECONDS};
use crate::features::{FeatureExtractor, FeatureMatrix};

/// A normalized feature matrix with its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSegment {
    pub features: FeatureMatrix,
    pub label: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    items: Vec<LabeledSegment>,
}

impl Dataset {
    pub fn new(items: Vec<LabeledSegment>) -> Self {
        Self { items }
    }

    pub fn items(&self) -> &[LabeledSegment] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, item: LabeledSegment) {
        self.items.push(item);
    }

    pub fn extend(&mut self, other: Dataset) {
        self.items.extend(other.items);
    }

    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|s| s.label).collect()
    }

    /// One more than the largest label, 0 when empty.
    pub fn n_classes(&self) -> usize {
        self.items.iter().map(|s| s.label + 1).max().unwrap_or(0)
    }

    /// Seeded shuffle, then the first `round(ratio · n)` items go to the first half.
    pub fn split(&self, ratio: f64, seed: u64) -> Result<(Dataset, Dataset), ModelError> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(ModelError::Config(format!("split ratio {ratio} outside [0, 1]")));
        }
        let mut items = self.items.clone();
        items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cut = (ratio * items.len() as f64).round() as usize;
        let rest = items.split_off(cut);
        Ok((Dataset::new(items), Dataset::new(rest)))
    }

    /// Normalized features for every 3.072 s window of a 16 kHz mono buffer,
    /// windows spaced `hop_seconds` apart, all carrying `label`.
    pub fn from_audio(
        audio: &AudioBuffer,
        label: usize,
        extractor: &FeatureExtractor,
        hop_seconds: f64,
    ) -> Result<Dataset, ModelError> {
        if audio.sample_rate() != ANALYSIS_RATE || audio.channels() != 1 {
            return Err(ModelError::Config(format!(
                "training audio must be {ANALYSIS_RATE} Hz mono, got {} Hz × {}",
                audio.sample_rate(),
                audio.channels()
            )));
        }
        if hop_seconds <= 0.0 {
            return Err(ModelError::Config("hop must be positive".into()));
        }
        let window = (SEGMENT_SECONDS * ANALYSIS_RATE as f64).round() as usize;
        let hop = ((hop_seconds * ANALYSIS_RATE as f64).round() as usize).max(1);
        let samples = audio.samples();
        let mut items = Vec::new();
        let mut start = 0;
        while start + window <= samples.len() {
            let features = extractor.extract_normalized(&samples[start..start + window])?;
            items.push(LabeledSegment { features, label });
            start += hop;
        }
        Ok(Dataset::new(items))
    }
}

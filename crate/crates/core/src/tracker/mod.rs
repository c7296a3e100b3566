//! Speaker embeddings from classifier activations and online speaker tracking.
//!
//! An embedding is the class-wise sum of activations divided by its largest
//! entry. The registry compares each new embedding against the running mean
//! of every enrolled speaker by cosine similarity and either assigns it to
//! the closest one or enrolls a new speaker.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default decision threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackerError {
    #[error("cannot aggregate an empty set of activations")]
    Empty,
    #[error("activations must be finite and non-negative")]
    Negative,
    #[error("activation vectors have different lengths ({0} vs {1})")]
    Length(usize, usize),
    #[error("embedding has zero norm")]
    ZeroNorm,
    #[error("unknown threshold mode '{0}' (distance or literal)")]
    Mode(String),
}

/// Max-normalized activation profile; all entries in `[0, 1]`, maximum 1
/// unless degenerate (all zero).
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
    degenerate: bool,
}

impl Embedding {
    /// Divides by the maximum; an all-zero vector is kept and flagged degenerate.
    pub fn from_values(values: Vec<f64>) -> Result<Self, TrackerError> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(TrackerError::Negative);
        }
        let max = values.iter().cloned().fold(0.0, f64::max);
        if max == 0.0 {
            return Ok(Self { values, degenerate: true });
        }
        Ok(Self { values: values.iter().map(|v| v / max).collect(), degenerate: false })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Class-wise sum of per-segment activations, divided by the largest sum.
pub fn aggregate<V: AsRef<[f32]>>(outputs: &[V]) -> Result<Embedding, TrackerError> {
    let first = outputs.first().ok_or(TrackerError::Empty)?.as_ref();
    let mut sum = vec![0.0f64; first.len()];
    for o in outputs {
        let o = o.as_ref();
        if o.len() != sum.len() {
            return Err(TrackerError::Length(sum.len(), o.len()));
        }
        for (s, &v) in sum.iter_mut().zip(o) {
            if !v.is_finite() || v < 0.0 {
                return Err(TrackerError::Negative);
            }
            *s += v as f64;
        }
    }
    Embedding::from_values(sum)
}

/// `a·b / (‖a‖‖b‖)`.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64, TrackerError> {
    cosine(a.values(), b.values())
}

fn cosine(a: &[f64], b: &[f64]) -> Result<f64, TrackerError> {
    if a.len() != b.len() {
        return Err(TrackerError::Length(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(TrackerError::ZeroNorm);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// How the threshold is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    /// New speaker when the cosine distance `1 − s*` to the best match exceeds θ.
    #[default]
    Distance,
    /// New speaker when the best similarity `s*` itself exceeds θ.
    Literal,
}

impl FromStr for ThresholdMode {
    type Err = TrackerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "distance" => Ok(ThresholdMode::Distance),
            "literal" => Ok(ThresholdMode::Literal),
            _ => Err(TrackerError::Mode(s.to_string())),
        }
    }
}

impl fmt::Display for ThresholdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdMode::Distance => "distance",
            ThresholdMode::Literal => "literal",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedSpeaker {
    pub id: String,
    /// Running mean of assigned embeddings, re-max-normalized.
    pub representative: Embedding,
    sum: Vec<f64>,
    pub segments: usize,
}

/// Outcome of one [`SpeakerRegistry::assign`].
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub speaker: String,
    pub enrolled: bool,
    /// Best similarity against the registry before the update, if any speaker existed.
    pub similarity: Option<f64>,
}

/// Online speaker registry; ids are `S0, S1, …` in order of enrollment.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerRegistry {
    speakers: Vec<TrackedSpeaker>,
    threshold: f64,
    mode: ThresholdMode,
    last: Option<usize>,
}

impl Default for SpeakerRegistry {
    fn default() -> Self {
        Self::new(DEFAULT_THRESHOLD, ThresholdMode::Distance)
    }
}

impl SpeakerRegistry {
    pub fn new(threshold: f64, mode: ThresholdMode) -> Self {
        Self { speakers: Vec::new(), threshold, mode, last: None }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn mode(&self) -> ThresholdMode {
        self.mode
    }

    pub fn speakers(&self) -> &[TrackedSpeaker] {
        &self.speakers
    }

    pub fn len(&self) -> usize {
        self.speakers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speakers.is_empty()
    }

    pub fn reset(&mut self) {
        self.speakers.clear();
        self.last = None;
    }

    fn enroll(&mut self, e: &Embedding) -> usize {
        let id = format!("S{}", self.speakers.len());
        self.speakers.push(TrackedSpeaker { id, representative: e.clone(), sum: e.values().to_vec(), segments: 1 });
        self.speakers.len() - 1
    }

    /// Best `(index, similarity)`; ties go to the earlier speaker.
    fn best_match(&self, e: &Embedding) -> Result<Option<(usize, f64)>, TrackerError> {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in self.speakers.iter().enumerate().filter(|(_, s)| !s.representative.is_degenerate()) {
            let sim = cosine_similarity(e, &s.representative)?;
            if best.map_or(true, |(_, b)| sim > b) {
                best = Some((i, sim));
            }
        }
        Ok(best)
    }

    /// Assigns a non-degenerate embedding to an existing or new speaker.
    pub fn assign(&mut self, e: &Embedding) -> Result<Assignment, TrackerError> {
        if e.is_degenerate() {
            return Err(TrackerError::ZeroNorm);
        }
        let best = self.best_match(e)?;
        if best.is_none() {
            // a speaker enrolled from silence takes the first real embedding
            if let Some(i) = self.speakers.iter().position(|s| s.representative.is_degenerate()) {
                let spk = &mut self.speakers[i];
                spk.sum = e.values().to_vec();
                spk.representative = e.clone();
                spk.segments += 1;
                self.last = Some(i);
                return Ok(Assignment { speaker: spk.id.clone(), enrolled: false, similarity: None });
            }
        }
        let new = match (best, self.mode) {
            (None, _) => true,
            (Some((_, s)), ThresholdMode::Distance) => 1.0 - s > self.threshold,
            (Some((_, s)), ThresholdMode::Literal) => s > self.threshold,
        };
        let index = if new {
            self.enroll(e)
        } else {
            let (i, _) = best.expect("existing speaker");
            let spk = &mut self.speakers[i];
            for (acc, v) in spk.sum.iter_mut().zip(e.values()) {
                *acc += v;
            }
            spk.segments += 1;
            spk.representative = Embedding::from_values(spk.sum.clone())?;
            i
        };
        self.last = Some(index);
        Ok(Assignment { speaker: self.speakers[index].id.clone(), enrolled: new, similarity: best.map(|b| b.1) })
    }

    /// Like [`assign`](Self::assign), but a degenerate embedding inherits the
    /// previous label (or enrolls `S0` when nothing came before).
    pub fn observe(&mut self, e: &Embedding) -> Result<Assignment, TrackerError> {
        if !e.is_degenerate() {
            return self.assign(e);
        }
        match self.last {
            Some(i) => Ok(Assignment { speaker: self.speakers[i].id.clone(), enrolled: false, similarity: None }),
            None => {
                let i = self.enroll(e);
                self.last = Some(i);
                Ok(Assignment { speaker: self.speakers[i].id.clone(), enrolled: true, similarity: None })
            }
        }
    }
}

#[cfg(test)]
mod tests;

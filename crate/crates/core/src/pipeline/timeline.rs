use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimelineError {
    #[error("turn {index} has invalid bounds [{start}, {end})")]
    Bounds { index: usize, start: f64, end: f64 },
    #[error("turn {index} starts before the previous turn")]
    Unsorted { index: usize },
    #[error("speaker {speaker} overlaps itself at turn {index}")]
    SelfOverlap { index: usize, speaker: String },
}

/// One labeled interval `[start, end)` in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub start: f64,
    pub end: f64,
    pub speaker: String,
}

impl Turn {
    pub fn new(start: f64, end: f64, speaker: impl Into<String>) -> Self {
        Self { start, end, speaker: speaker.into() }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Who spoke when in one file: turns sorted by start, positive length, and
/// never overlapping another turn of the same speaker.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Timeline {
    file_id: String,
    turns: Vec<Turn>,
}

impl Timeline {
    pub fn new(file_id: impl Into<String>, turns: Vec<Turn>) -> Result<Self, TimelineError> {
        let mut last_end: HashMap<&str, f64> = HashMap::new();
        for (index, t) in turns.iter().enumerate() {
            if !(t.start.is_finite() && t.end.is_finite() && t.start >= 0.0 && t.start < t.end) {
                return Err(TimelineError::Bounds { index, start: t.start, end: t.end });
            }
            if index > 0 && t.start < turns[index - 1].start {
                return Err(TimelineError::Unsorted { index });
            }
            if let Some(&end) = last_end.get(t.speaker.as_str()) {
                if t.start < end {
                    return Err(TimelineError::SelfOverlap { index, speaker: t.speaker.clone() });
                }
            }
            last_end.insert(&t.speaker, t.end);
        }
        Ok(Self { file_id: file_id.into(), turns })
    }

    /// Sorts by start first; still rejects invalid bounds and self-overlap.
    pub fn from_unsorted(file_id: impl Into<String>, mut turns: Vec<Turn>) -> Result<Self, TimelineError> {
        turns.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
        Self::new(file_id, turns)
    }

    pub fn empty(file_id: impl Into<String>) -> Self {
        Self { file_id: file_id.into(), turns: Vec::new() }
    }

    pub fn file_id(&self) -> &str {
        &self.file_id
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn into_turns(self) -> Vec<Turn> {
        self.turns
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    /// Distinct speaker labels in order of first appearance.
    pub fn speakers(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for t in &self.turns {
            if !out.contains(&t.speaker.as_str()) {
                out.push(&t.speaker);
            }
        }
        out
    }

    /// End of the last turn, 0 when empty.
    pub fn end(&self) -> f64 {
        self.turns.iter().map(|t| t.end).fold(0.0, f64::max)
    }

    /// Summed turn durations.
    pub fn total_duration(&self) -> f64 {
        self.turns.iter().map(Turn::duration).sum()
    }

    /// Same turns, every label replaced through `map`.
    pub fn relabeled(&self, map: impl Fn(&str) -> String) -> Self {
        let turns = self.turns.iter().map(|t| Turn::new(t.start, t.end, map(&t.speaker))).collect();
        Self { file_id: self.file_id.clone(), turns }
    }

    pub fn with_file_id(mut self, file_id: impl Into<String>) -> Self {
        self.file_id = file_id.into();
        self
    }
}

impl fmt::Display for Timeline {
    /// Human-readable turn table.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>10} {:>10} {:>9}  speaker", "start", "end", "duration")?;
        for t in &self.turns {
            writeln!(f, "{:>10.3} {:>10.3} {:>9.3}  {}", t.start, t.end, t.duration(), t.speaker)?;
        }
        Ok(())
    }
}

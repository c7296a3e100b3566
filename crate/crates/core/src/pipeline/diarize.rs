use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::smoothing::{consolidate, majority_smooth, Span};
use super::vad::{vad_energy, SpeechMask};
use super::{Timeline, TimelineError, Turn};
use crate::audio::{resample, segment_stream, AudioBuffer, AudioError, ANALYSIS_RATE, SEGMENT_HOP_SECONDS, SEGMENT_SECONDS};
use crate::features::{FeatureExtractor, FeatureKind, FeatureMatrix};
use crate::model::{ModelError, RcnnModel};
use crate::tracker::{aggregate, SpeakerRegistry, ThresholdMode, TrackerError, DEFAULT_THRESHOLD};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stream is {seconds:.3} s long; at least {SEGMENT_SECONDS} s is needed for one window")]
    TooShort { seconds: f64 },
    #[error("pipeline expects {configured} features but the model was trained on {model}")]
    FeatureKind { configured: FeatureKind, model: FeatureKind },
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub feature_kind: FeatureKind,
    pub threshold: f64,
    pub threshold_mode: ThresholdMode,
    /// Majority-vote half-width in windows.
    pub smoothing: usize,
    /// Turns shorter than this are folded into a neighbour, seconds.
    pub min_turn: f64,
    /// Energy VAD threshold in dB below the stream RMS; `None` treats everything as speech.
    pub vad_threshold_db: Option<f64>,
    /// With VAD on, windows whose labeled span has less speech than this
    /// (or none at all) are skipped.
    pub min_speech_fraction: f64,
    /// Worker threads for feature extraction and inference.
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            feature_kind: FeatureKind::Cqt,
            threshold: DEFAULT_THRESHOLD,
            threshold_mode: ThresholdMode::Distance,
            smoothing: 2,
            min_turn: 0.5,
            vad_threshold_db: None,
            min_speech_fraction: 0.5,
            jobs: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.min_turn >= 0.0 && self.min_turn.is_finite()) {
            return Err(PipelineError::Config(format!("min turn {} must be a non-negative number", self.min_turn)));
        }
        if !self.threshold.is_finite() {
            return Err(PipelineError::Config("threshold must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.min_speech_fraction) {
            return Err(PipelineError::Config("speech fraction must lie in [0, 1]".into()));
        }
        if self.jobs == 0 {
            return Err(PipelineError::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

/// The decision for one analysis window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowDecision {
    pub start: f64,
    /// End of the span the label covers: the next hop, or the stream end for the last window.
    pub end: f64,
    /// Tracker label, `None` when VAD skipped the window.
    pub raw: Option<String>,
    pub smoothed: Option<String>,
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diarization {
    pub timeline: Timeline,
    pub windows: Vec<WindowDecision>,
    pub speech_mask: Option<SpeechMask>,
}

/// Windows processed per parallel round; bounds feature memory on long streams.
const ROUND: usize = 256;

fn head_outputs(
    model: &RcnnModel,
    extractor: &FeatureExtractor,
    windows: &[&[f32]],
    jobs: usize,
) -> Result<Vec<Vec<f32>>, PipelineError> {
    let run = |chunk: &[&[f32]]| -> Result<Vec<Vec<f32>>, PipelineError> {
        let feats = chunk
            .iter()
            .map(|w| extractor.extract_normalized(w).map_err(ModelError::from))
            .collect::<Result<Vec<FeatureMatrix>, _>>()?;
        let refs: Vec<&FeatureMatrix> = feats.iter().collect();
        Ok(model.predict(&refs)?)
    };
    let mut out = Vec::with_capacity(windows.len());
    for round in windows.chunks(ROUND) {
        if jobs <= 1 || round.len() < 2 {
            out.extend(run(round)?);
            continue;
        }
        let per = round.len().div_ceil(jobs);
        let parts = thread::scope(|s| {
            let handles: Vec<_> = round.chunks(per).map(|c| s.spawn(move || run(c))).collect();
            handles.into_iter().map(|h| h.join().expect("inference worker panicked")).collect::<Vec<_>>()
        });
        for p in parts {
            out.extend(p?);
        }
    }
    Ok(out)
}

/// Per-window head outputs for a stream, before any tracking decision.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowOutputs {
    pub feature_kind: FeatureKind,
    /// Span each window's label covers: the next hop, or the stream end for the last window.
    pub spans: Vec<(f64, f64)>,
    /// Head activations; `None` for windows the VAD skipped.
    pub outputs: Vec<Option<Vec<f32>>>,
    pub speech_mask: Option<SpeechMask>,
}

/// Features and inference for every window of a stream. Any rate or channel
/// count is accepted and converted to 16 kHz mono first.
pub fn analyze(audio: &AudioBuffer, model: &RcnnModel, config: &PipelineConfig) -> Result<WindowOutputs, PipelineError> {
    config.validate()?;
    if model.feature_kind() != config.feature_kind {
        return Err(PipelineError::FeatureKind { configured: config.feature_kind, model: model.feature_kind() });
    }
    let mut mono = audio.to_mono();
    if mono.sample_rate() != ANALYSIS_RATE {
        mono = resample(&mono, ANALYSIS_RATE);
    }
    let duration = mono.duration();
    let windows = segment_stream(&mono)?;
    if windows.is_empty() {
        return Err(PipelineError::TooShort { seconds: duration });
    }
    let mask = config.vad_threshold_db.map(|db| vad_energy(&mono, db));

    let last = windows.len() - 1;
    let spans: Vec<(f64, f64)> = windows
        .iter()
        .map(|w| (w.start_time, if w.index == last { duration } else { w.start_time + SEGMENT_HOP_SECONDS }))
        .collect();
    let active: Vec<usize> = (0..windows.len())
        .filter(|&i| {
            mask.as_ref().map_or(true, |m| {
                let f = m.speech_fraction(spans[i].0, spans[i].1);
                f > 0.0 && f >= config.min_speech_fraction
            })
        })
        .collect();

    let extractor = FeatureExtractor::new(config.feature_kind);
    let samples: Vec<&[f32]> = active.iter().map(|&i| windows[i].samples).collect();
    let mut outputs = vec![None; windows.len()];
    for (&i, out) in active.iter().zip(head_outputs(model, &extractor, &samples, config.jobs)?) {
        outputs[i] = Some(out);
    }
    Ok(WindowOutputs { feature_kind: config.feature_kind, spans, outputs, speech_mask: mask })
}

/// Online tracking, smoothing and turn consolidation over analyzed windows.
pub fn track(file_id: &str, windows: &WindowOutputs, config: &PipelineConfig) -> Result<Diarization, PipelineError> {
    config.validate()?;
    let n = windows.spans.len();
    let mut registry = SpeakerRegistry::new(config.threshold, config.threshold_mode);
    let mut raw: Vec<Option<usize>> = vec![None; n];
    let mut similarity: Vec<Option<f64>> = vec![None; n];
    for (i, out) in windows.outputs.iter().enumerate() {
        let Some(out) = out else { continue };
        let embedding = aggregate(&[out])?;
        let a = registry.observe(&embedding)?;
        let index = registry.speakers().iter().position(|s| s.id == a.speaker).expect("assigned speaker is registered");
        raw[i] = Some(index);
        similarity[i] = a.similarity;
    }
    let smoothed = majority_smooth(&raw, config.smoothing);
    let name = |l: Option<usize>| l.map(|l| registry.speakers()[l].id.clone());

    let labeled: Vec<Span> = windows
        .spans
        .iter()
        .zip(&smoothed)
        .filter_map(|(&(start, end), l)| l.map(|label| Span { start, end, label }))
        .collect();
    let turns = consolidate(labeled, config.min_turn)
        .into_iter()
        .map(|s| Turn::new(s.start, s.end, registry.speakers()[s.label].id.clone()))
        .collect();
    let timeline = Timeline::new(file_id, turns)?;
    let decisions = (0..n)
        .map(|i| WindowDecision {
            start: windows.spans[i].0,
            end: windows.spans[i].1,
            raw: name(raw[i]),
            smoothed: name(smoothed[i]),
            similarity: similarity[i],
        })
        .collect();
    Ok(Diarization { timeline, windows: decisions, speech_mask: windows.speech_mask.clone() })
}

/// [`analyze`] followed by [`track`].
pub fn diarize(
    file_id: &str,
    audio: &AudioBuffer,
    model: &RcnnModel,
    config: &PipelineConfig,
) -> Result<Diarization, PipelineError> {
    track(file_id, &analyze(audio, model, config)?, config)
}

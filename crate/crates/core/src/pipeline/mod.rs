//! Windowed diarization of a stream into a speaker timeline.

mod diarize;
mod smoothing;
mod timeline;
mod vad;

pub use diarize::{analyze, diarize, track, Diarization, PipelineConfig, PipelineError, WindowDecision, WindowOutputs};
pub use smoothing::{consolidate, majority_smooth, Span};
pub use timeline::{Timeline, TimelineError, Turn};
pub use vad::{vad_energy, SpeechMask, VAD_FRAME_SECONDS};

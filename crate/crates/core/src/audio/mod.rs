//! Audio ingestion: WAV I/O, mono mixdown, resampling and fixed-length
//! segmentation into analysis windows.

mod resample;
mod segment;
mod wav;

pub use resample::{resample, RESAMPLE_CUTOFF};
pub use segment::{segment_count, segment_stream, SegmentWindow, SEGMENT_HOP_SECONDS, SEGMENT_SECONDS};
pub use wav::{load_wav, read_wav, save_wav, save_wav_pcm16, write_wav};

use thiserror::Error;

/// Sample rate the analysis front end runs at.
pub const ANALYSIS_RATE: u32 = 16_000;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("cannot read {path}: {source}")]
    Unreadable { path: String, source: std::io::Error },
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("truncated data chunk after {samples_read} of {expected} samples")]
    Truncated { samples_read: usize, expected: usize },
    #[error("malformed WAV file: {0}")]
    Malformed(String),
    #[error("cannot write WAV: {0}")]
    Write(String),
    #[error("expected {expected} Hz audio, got {actual} Hz")]
    SampleRate { expected: u32, actual: u32 },
    #[error("expected mono audio, got {0} channels")]
    NotMono(u16),
    #[error("invalid audio buffer: {0}")]
    Invalid(String),
}

/// Interleaved audio samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
    channels: u16,
}

impl AudioBuffer {
    pub fn mono(samples: Vec<f32>, sample_rate: u32) -> Result<Self, AudioError> {
        Self::interleaved(samples, sample_rate, 1)
    }

    pub fn interleaved(samples: Vec<f32>, sample_rate: u32, channels: u16) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::Invalid("sample rate must be positive".into()));
        }
        if channels == 0 {
            return Err(AudioError::Invalid("channel count must be positive".into()));
        }
        if samples.len() % channels as usize != 0 {
            return Err(AudioError::Invalid(format!(
                "{} samples do not divide into {channels} channels",
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().position(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(AudioError::Invalid(format!("sample {bad} outside [-1, 1]: {}", samples[bad])));
        }
        Ok(Self { samples, sample_rate, channels })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> u16 {
        self.channels
    }

    /// Samples per channel.
    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels as usize
    }

    pub fn duration(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }

    /// Averages all channels into one.
    pub fn to_mono(&self) -> AudioBuffer {
        if self.channels == 1 {
            return self.clone();
        }
        let ch = self.channels as usize;
        let samples = self
            .samples
            .chunks_exact(ch)
            .map(|frame| (frame.iter().map(|&s| s as f64).sum::<f64>() / ch as f64) as f32)
            .collect();
        AudioBuffer { samples, sample_rate: self.sample_rate, channels: 1 }
    }

    /// Copies `[start, end)` seconds of a mono buffer.
    pub fn slice_seconds(&self, start: f64, end: f64) -> AudioBuffer {
        let ch = self.channels as usize;
        let a = ((start * self.sample_rate as f64).round().max(0.0) as usize).min(self.frames());
        let b = ((end * self.sample_rate as f64).round().max(0.0) as usize).clamp(a, self.frames());
        AudioBuffer { samples: self.samples[a * ch..b * ch].to_vec(), sample_rate: self.sample_rate, channels: self.channels }
    }

    /// Appends another buffer with the same rate and channel count.
    pub fn append(&mut self, other: &AudioBuffer) -> Result<(), AudioError> {
        if other.sample_rate != self.sample_rate || other.channels != self.channels {
            return Err(AudioError::Invalid("cannot concatenate buffers with different formats".into()));
        }
        self.samples.extend_from_slice(&other.samples);
        Ok(())
    }
}

/// Mono mixdown as a free function.
pub fn to_mono(buffer: &AudioBuffer) -> AudioBuffer {
    buffer.to_mono()
}

/// Clamps to `[-1, 1]`, mapping NaN to 0, and returns how many samples changed.
pub(crate) fn clamp_samples(samples: &mut [f32]) -> usize {
    let mut clipped = 0;
    for s in samples.iter_mut() {
        if s.is_nan() {
            *s = 0.0;
            clipped += 1;
        } else if s.abs() > 1.0 {
            *s = s.clamp(-1.0, 1.0);
            clipped += 1;
        }
    }
    clipped
}

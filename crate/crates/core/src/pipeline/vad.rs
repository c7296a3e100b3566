use crate::audio::AudioBuffer;

pub const VAD_FRAME_SECONDS: f64 = 0.032;

/// Per-frame speech flags from an energy detector.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeechMask {
    pub frame_seconds: f64,
    pub speech: Vec<bool>,
}

impl SpeechMask {
    /// Fraction of speech frames overlapping `[start, end)`; 0 for an empty span.
    pub fn speech_fraction(&self, start: f64, end: f64) -> f64 {
        if end <= start || self.speech.is_empty() {
            return 0.0;
        }
        let first = (start / self.frame_seconds).floor().max(0.0) as usize;
        let last = ((end / self.frame_seconds).ceil() as usize).min(self.speech.len());
        if first >= last {
            return 0.0;
        }
        let hits = self.speech[first..last].iter().filter(|&&s| s).count();
        hits as f64 / (last - first) as f64
    }

    /// Start time of the first frame whose flag differs from frame 0.
    pub fn first_change(&self) -> Option<f64> {
        let head = *self.speech.first()?;
        self.speech.iter().position(|&s| s != head).map(|i| i as f64 * self.frame_seconds)
    }
}

/// Marks 32 ms frames as non-speech when their RMS falls more than
/// `threshold_db` below the RMS of the whole stream.
///
/// A trailing partial frame is judged on the samples it has. Digital silence
/// (stream RMS of zero) is non-speech everywhere.
pub fn vad_energy(audio: &AudioBuffer, threshold_db: f64) -> SpeechMask {
    let mono = audio.to_mono();
    let samples = mono.samples();
    let frame = ((VAD_FRAME_SECONDS * mono.sample_rate() as f64).round() as usize).max(1);
    let frame_seconds = frame as f64 / mono.sample_rate() as f64;
    let mean_square = |xs: &[f32]| xs.iter().map(|&x| x as f64 * x as f64).sum::<f64>() / xs.len().max(1) as f64;
    let total = mean_square(samples);
    if total == 0.0 {
        return SpeechMask { frame_seconds, speech: vec![false; samples.len().div_ceil(frame)] };
    }
    // compare mean squares: 20·log10(rms) = 10·log10(ms)
    let floor = total * 10f64.powf(-threshold_db / 10.0);
    let speech = samples.chunks(frame).map(|c| mean_square(c) >= floor).collect();
    SpeechMask { frame_seconds, speech }
}

use super::{AudioBuffer, AudioError, ANALYSIS_RATE};

pub const SEGMENT_SECONDS: f64 = 3.072;
pub const SEGMENT_HOP_SECONDS: f64 = 0.25;

/// One fixed-length analysis excerpt borrowed from a mono stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentWindow<'a> {
    pub index: usize,
    pub start_time: f64,
    pub samples: &'a [f32],
}

fn window_and_hop(rate: u32) -> (usize, usize) {
    (
        (SEGMENT_SECONDS * rate as f64).round() as usize,
        (SEGMENT_HOP_SECONDS * rate as f64).round() as usize,
    )
}

/// Number of full windows in `frames` samples: `floor((n − window) / hop) + 1`,
/// or zero when the stream is shorter than one window.
pub fn segment_count(frames: usize, rate: u32) -> usize {
    let (window, hop) = window_and_hop(rate);
    if frames < window {
        0
    } else {
        (frames - window) / hop + 1
    }
}

/// Cuts a mono 16 kHz stream into 3.072 s windows every 250 ms.
///
/// No padding: a stream shorter than one window yields no windows.
pub fn segment_stream(buffer: &AudioBuffer) -> Result<Vec<SegmentWindow<'_>>, AudioError> {
    if buffer.sample_rate() != ANALYSIS_RATE {
        return Err(AudioError::SampleRate { expected: ANALYSIS_RATE, actual: buffer.sample_rate() });
    }
    if buffer.channels() != 1 {
        return Err(AudioError::NotMono(buffer.channels()));
    }
    let (window, hop) = window_and_hop(buffer.sample_rate());
    let count = segment_count(buffer.frames(), buffer.sample_rate());
    Ok((0..count)
        .map(|index| SegmentWindow {
            index,
            start_time: index as f64 * SEGMENT_HOP_SECONDS,
            samples: &buffer.samples()[index * hop..index * hop + window],
        })
        .collect())
}

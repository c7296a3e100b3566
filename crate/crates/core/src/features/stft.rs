use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex32;
use rustfft::{Fft, FftPlanner};

pub const FFT_SIZE: usize = 512;
pub const HOP_SIZE: usize = 256;
pub const BINS: usize = FFT_SIZE / 2 + 1;
pub const PRE_EMPHASIS: f32 = 0.97;

/// First-order pre-emphasis `y[n] = x[n] − coeff · x[n−1]`, with `y[0] = x[0]`.
pub fn pre_emphasis(samples: &[f32], coeff: f32) -> Vec<f32> {
    assert!((0.0..1.0).contains(&coeff), "pre-emphasis coefficient must be in [0, 1)");
    let mut out = Vec::with_capacity(samples.len());
    let mut prev = None;
    for &x in samples {
        out.push(match prev {
            None => x,
            Some(p) => x - coeff * p,
        });
        prev = Some(x);
    }
    out
}

/// Symmetric Hamming window.
pub fn hamming(len: usize) -> Vec<f32> {
    (0..len)
        .map(|n| (0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos()) as f32)
        .collect()
}

/// Magnitude STFT, `BINS × frames`, stored bin-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSpectrogram {
    values: Vec<f32>,
    frames: usize,
}

impl MagnitudeSpectrogram {
    pub fn from_values(values: Vec<f32>, frames: usize) -> Self {
        assert_eq!(values.len(), BINS * frames, "spectrogram must be {BINS} × frames");
        Self { values, frames }
    }

    pub fn zeros(frames: usize) -> Self {
        Self { values: vec![0.0; BINS * frames], frames }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        BINS
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, bin: usize, frame: usize) -> f32 {
        self.values[bin * self.frames + frame]
    }

    pub fn column(&self, frame: usize) -> Vec<f32> {
        (0..BINS).map(|b| self.get(b, frame)).collect()
    }
}

/// Frame count for a signal of `len` samples: `floor((len − 512) / 256) + 1`.
pub fn frame_count(len: usize) -> usize {
    if len < FFT_SIZE {
        0
    } else {
        (len - FFT_SIZE) / HOP_SIZE + 1
    }
}

/// 512-point Hamming-windowed FFT analysis with a 256-sample hop.
#[derive(Clone)]
pub struct Stft {
    window: Vec<f32>,
    fft: Arc<dyn Fft<f32>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("size", &FFT_SIZE).field("hop", &HOP_SIZE).finish()
    }
}

impl Default for Stft {
    fn default() -> Self {
        Self::new()
    }
}

impl Stft {
    pub fn new() -> Self {
        let fft = FftPlanner::new().plan_fft_forward(FFT_SIZE);
        Self { window: hamming(FFT_SIZE), fft }
    }

    pub fn magnitude(&self, samples: &[f32]) -> MagnitudeSpectrogram {
        let frames = frame_count(samples.len());
        let mut values = vec![0.0f32; BINS * frames];
        let mut buf = vec![Complex32::new(0.0, 0.0); FFT_SIZE];
        let mut scratch = vec![Complex32::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for t in 0..frames {
            let frame = &samples[t * HOP_SIZE..t * HOP_SIZE + FFT_SIZE];
            for ((b, &x), &w) in buf.iter_mut().zip(frame).zip(&self.window) {
                *b = Complex32::new(x * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (bin, c) in buf[..BINS].iter().enumerate() {
                values[bin * frames + t] = c.norm();
            }
        }
        MagnitudeSpectrogram { values, frames }
    }
}

/// Convenience wrapper that plans a fresh FFT.
pub fn stft_magnitude(samples: &[f32]) -> MagnitudeSpectrogram {
    Stft::new().magnitude(samples)
}

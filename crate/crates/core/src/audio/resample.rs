use std::f64::consts::PI;

use super::AudioBuffer;

/// Anti-aliasing cutoff as a fraction of the lower of the two sample rates.
pub const RESAMPLE_CUTOFF: f64 = 0.45;

/// Zero crossings of the sinc kept on each side of the centre tap.
const HALF_ZERO_CROSSINGS: f64 = 24.0;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn blackman(x: f64) -> f64 {
    // x in [-1, 1]
    let t = (x + 1.0) * 0.5;
    0.42 - 0.5 * (2.0 * PI * t).cos() + 0.08 * (4.0 * PI * t).cos()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Polyphase windowed-sinc filter for the rational ratio `up / down`.
struct Polyphase {
    up: u64,
    down: u64,
    half: isize,
    // phases[p][i + half] weights x[k0 + i] for fractional offset p / up
    phases: Vec<Vec<f64>>,
}

impl Polyphase {
    fn new(source: u32, target: u32) -> Self {
        let g = gcd(source as u64, target as u64);
        let up = target as u64 / g;
        let down = source as u64 / g;
        // cutoff in cycles per input sample
        let fc = RESAMPLE_CUTOFF * source.min(target) as f64 / source as f64;
        let reach = HALF_ZERO_CROSSINGS / (2.0 * fc);
        let half = reach.ceil() as isize;
        let phases = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                let mut taps: Vec<f64> = (-half..=half)
                    .map(|i| {
                        let t = frac - i as f64;
                        if t.abs() >= reach {
                            0.0
                        } else {
                            2.0 * fc * sinc(2.0 * fc * t) * blackman(t / reach)
                        }
                    })
                    .collect();
                let sum: f64 = taps.iter().sum();
                taps.iter_mut().for_each(|w| *w /= sum);
                taps
            })
            .collect();
        Self { up, down, half, phases }
    }

    fn run(&self, input: &[f32], channels: usize, out_frames: usize) -> Vec<f32> {
        let in_frames = (input.len() / channels) as isize;
        let mut out = vec![0.0f32; out_frames * channels];
        for j in 0..out_frames {
            let pos = j as u64 * self.down;
            let k0 = (pos / self.up) as isize;
            let taps = &self.phases[(pos % self.up) as usize];
            for ch in 0..channels {
                let mut acc = 0.0f64;
                for (idx, &w) in taps.iter().enumerate() {
                    let k = k0 + idx as isize - self.half;
                    if k >= 0 && k < in_frames {
                        acc += w * input[k as usize * channels + ch] as f64;
                    }
                }
                out[j * channels + ch] = acc.clamp(-1.0, 1.0) as f32;
            }
        }
        out
    }
}

/// Band-limited sample-rate conversion with a windowed-sinc polyphase filter.
///
/// The output has `round(frames · target / source)` frames and the passband
/// ends at 0.45 × the lower of the two rates. Equal rates return the input
/// unchanged.
pub fn resample(buffer: &AudioBuffer, target_rate: u32) -> AudioBuffer {
    assert!(target_rate > 0, "target rate must be positive");
    let source = buffer.sample_rate();
    if source == target_rate {
        return buffer.clone();
    }
    let out_frames = (buffer.frames() as f64 * target_rate as f64 / source as f64).round() as usize;
    let filter = Polyphase::new(source, target_rate);
    let samples = filter.run(buffer.samples(), buffer.channels() as usize, out_frames);
    AudioBuffer::interleaved(samples, target_rate, buffer.channels()).expect("resampled samples are clamped and finite")
}

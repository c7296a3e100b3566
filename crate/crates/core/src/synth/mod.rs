//! Deterministic formant-synthesis speakers.
//!
//! A speaker is a glottal-like harmonic source at its own pitch, shaped by
//! three formant resonances, with its own intonation and syllable rhythm and a
//! little formant-filtered breath noise. Everything derives from seeds.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioBuffer, ANALYSIS_RATE};
use crate::pipeline::{Timeline, Turn};

pub const F0_MIN: f64 = 80.0;
pub const F0_MAX: f64 = 300.0;
pub const F0_SEPARATION: f64 = 10.0;
pub const MAX_SPEAKERS: usize = 22;
/// Peak level of every render, −3 dBFS.
pub const PEAK_LEVEL: f64 = 0.707_945_784_384_137_9;
const HARMONIC_CEILING_HZ: f64 = 5000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("need at least one speaker")]
    NoSpeakers,
    #[error("{0} speakers cannot keep {F0_SEPARATION} Hz pitch separation in [{F0_MIN}, {F0_MAX}] Hz (max {MAX_SPEAKERS})")]
    TooManySpeakers(usize),
    #[error("turn {0} refers to an unknown speaker or has non-positive duration")]
    BadTurn(usize),
    #[error("empty turn plan")]
    EmptyPlan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Formant {
    pub center: f64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpeaker {
    pub id: usize,
    /// Mean fundamental in Hz.
    pub f0: f64,
    pub formants: [Formant; 3],
    /// Breath-noise share of the signal, in `[0, 1]`.
    pub noise_mix: f64,
    /// Relative pitch excursion of the intonation contour.
    pub intonation_depth: f64,
    /// Intonation contour rate in Hz.
    pub intonation_rate: f64,
    /// Syllable rate in Hz.
    pub syllable_rate: f64,
    /// Spectral slope exponent of the harmonic source.
    pub tilt: f64,
    pub seed: u64,
}

impl SyntheticSpeaker {
    pub fn label(&self) -> String {
        format!("spk{}", self.id)
    }

    /// Formant envelope gain at `f`, between about 0.15 and 1.
    fn envelope(&self, f: f64) -> f64 {
        let weights = [1.0, 0.6, 0.35];
        let mut g = 0.15;
        for (fm, w) in self.formants.iter().zip(weights) {
            let x = (f - fm.center) / (0.5 * fm.bandwidth);
            g += w / (1.0 + x * x);
        }
        g.min(1.0)
    }
}

/// `n` speakers with pitches at least 10 Hz apart, ids `0..n`.
///
/// Pitches are spread by sorted uniform slack over the allowed range, then
/// assigned to ids in seeded random order.
pub fn make_speakers(n: usize, seed: u64) -> Result<Vec<SyntheticSpeaker>, SynthError> {
    if n == 0 {
        return Err(SynthError::NoSpeakers);
    }
    if n > MAX_SPEAKERS {
        return Err(SynthError::TooManySpeakers(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slack = (F0_MAX - F0_MIN) - F0_SEPARATION * (n - 1) as f64;
    let mut offsets: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=slack)).collect();
    offsets.sort_by(f64::total_cmp);
    let mut pitches: Vec<f64> = offsets
        .iter()
        .enumerate()
        .map(|(i, u)| F0_MIN + u + F0_SEPARATION * i as f64)
        .collect();
    for i in (1..n).rev() {
        pitches.swap(i, rng.gen_range(0..=i));
    }
    Ok(pitches
        .into_iter()
        .enumerate()
        .map(|(id, f0)| {
            let f1 = rng.gen_range(300.0..900.0);
            let f2 = rng.gen_range(f1 + 400.0..2500.0);
            let f3 = rng.gen_range(2500.0..3500.0);
            SyntheticSpeaker {
                id,
                f0,
                formants: [
                    Formant { center: f1, bandwidth: rng.gen_range(60.0..160.0) },
                    Formant { center: f2, bandwidth: rng.gen_range(80.0..200.0) },
                    Formant { center: f3, bandwidth: rng.gen_range(120.0..250.0) },
                ],
                noise_mix: rng.gen_range(0.05..0.3),
                intonation_depth: rng.gen_range(0.02..0.08),
                intonation_rate: rng.gen_range(0.3..1.2),
                syllable_rate: rng.gen_range(3.0..6.0),
                tilt: rng.gen_range(0.8..1.6),
                seed: rng.gen(),
            }
        })
        .collect())
}

/// Two-pole resonator, unit peak gain at its center.
struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(center: f64, bandwidth: f64, rate: f64) -> Self {
        let r = (-PI * bandwidth / rate).exp();
        let theta = 2.0 * PI * center / rate;
        Self { a1: 2.0 * r * theta.cos(), a2: -r * r, gain: 1.0 - r, y1: 0.0, y2: 0.0 }
    }

    fn process(&mut self, x: f64) -> f64 {
        let y = self.gain * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// `duration` seconds of 16 kHz mono speech-like audio, peak at −3 dBFS.
///
/// The fundamental is the strongest partial; higher harmonics follow the
/// source tilt and the formant envelope.
pub fn render(speaker: &SyntheticSpeaker, duration: f64, seed: u64) -> AudioBuffer {
    let rate = ANALYSIS_RATE as f64;
    let n = (duration * rate).round().max(0.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(speaker.seed ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let into_phase = rng.gen_range(0.0..2.0 * PI);
    let syll_phase = rng.gen_range(0.0..2.0 * PI);
    let max_h = (HARMONIC_CEILING_HZ / (speaker.f0 * (1.0 + speaker.intonation_depth + 0.02))).floor() as usize;
    let amps: Vec<f64> = (1..=max_h)
        .map(|h| if h == 1 { 1.0 } else { 0.6 * (h as f64).powf(-speaker.tilt) * speaker.envelope(h as f64 * speaker.f0) })
        .collect();
    let mut resonators: Vec<Resonator> =
        speaker.formants.iter().map(|f| Resonator::new(f.center, f.bandwidth, rate)).collect();

    let mut voiced = Vec::with_capacity(n);
    let mut breath = Vec::with_capacity(n);
    let mut phase = 0.0f64;
    let mut jitter = 0.0f64;
    for i in 0..n {
        let t = i as f64 / rate;
        if i % 160 == 0 {
            // slow random walk of ±~1 % around the contour, updated every 10 ms
            let step: f64 = StandardNormal.sample(&mut rng);
            jitter = 0.97 * jitter + 0.002 * step;
        }
        let f0 = speaker.f0 * (1.0 + speaker.intonation_depth * (2.0 * PI * speaker.intonation_rate * t + into_phase).sin() + jitter);
        phase = (phase + 2.0 * PI * f0 / rate) % (2.0 * PI);
        let mut v = 0.0;
        for (h, a) in amps.iter().enumerate() {
            v += a * ((h + 1) as f64 * phase).sin();
        }
        let syllable = (PI * speaker.syllable_rate * t + syll_phase).sin().abs();
        let envelope = 0.25 + 0.75 * syllable.powf(1.5);
        voiced.push(v * envelope);
        let white: f64 = StandardNormal.sample(&mut rng);
        let shaped: f64 = resonators.iter_mut().map(|r| r.process(white)).sum();
        breath.push(shaped * envelope);
    }
    let rms = |x: &[f64]| (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    let (rv, rb) = (rms(&voiced), rms(&breath));
    let noise_gain = if rb > 0.0 { speaker.noise_mix * rv / rb } else { 0.0 };
    let mixed: Vec<f64> = voiced.iter().zip(&breath).map(|(v, b)| (1.0 - speaker.noise_mix) * v + noise_gain * b).collect();
    let peak = mixed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { PEAK_LEVEL / peak } else { 0.0 };
    let samples = mixed.iter().map(|v| (v * scale) as f32).collect();
    AudioBuffer::mono(samples, ANALYSIS_RATE).expect("synthesized samples are finite and in range")
}

/// Concatenated renders of `plan` (speaker index into `speakers`, seconds)
/// and the exact reference timeline, boundaries on sample positions.
pub fn make_dialogue(
    speakers: &[SyntheticSpeaker],
    plan: &[(usize, f64)],
    seed: u64,
) -> Result<(AudioBuffer, Timeline), SynthError> {
    if plan.is_empty() {
        return Err(SynthError::EmptyPlan);
    }
    let rate = ANALYSIS_RATE as f64;
    let mut samples = Vec::new();
    let mut turns: Vec<Turn> = Vec::new();
    for (i, &(who, dur)) in plan.iter().enumerate() {
        let speaker = speakers.get(who).ok_or(SynthError::BadTurn(i))?;
        if !(dur > 0.0) || (dur * rate).round() < 1.0 {
            return Err(SynthError::BadTurn(i));
        }
        let start = samples.len() as f64 / rate;
        let audio = render(speaker, dur, seed.wrapping_add(i as u64 + 1));
        samples.extend_from_slice(audio.samples());
        let end = samples.len() as f64 / rate;
        match turns.last_mut() {
            Some(last) if last.speaker == speaker.label() => last.end = end,
            _ => turns.push(Turn::new(start, end, speaker.label())),
        }
    }
    let timeline = Timeline::new(format!("dialogue{seed}"), turns).expect("consecutive turns are valid");
    let audio = AudioBuffer::mono(samples, ANALYSIS_RATE).expect("rendered samples are valid");
    Ok((audio, timeline))
}

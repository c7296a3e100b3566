//! Spectro-temporal front end: 96 × T feature matrices from 16 kHz segments.
//!
//! Every kind shares one STFT (512-point Hamming, hop 256) and differs only in
//! the 96-row filter bank applied to its magnitude.

mod banks;
mod io;
mod stft;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use banks::{
    bin_frequency, cqt_bank, cqt_center, cqt_q, erb, erb_rate_to_hz, gammatone_bandwidth,
    gammatone_bank, hz_to_erb_rate, hz_to_mel, linear_bank, mel_bank, mel_to_hz, FilterBank,
    CQT_BINS_PER_OCTAVE, CQT_MIN_HZ, CQT_OCTAVES, GAMMATONE_MIN_HZ, N_BANDS,
};
pub use io::{read_binary, write_binary, write_csv};
pub use stft::{
    frame_count, hamming, pre_emphasis, stft_magnitude, MagnitudeSpectrogram, Stft, BINS,
    FFT_SIZE, HOP_SIZE, PRE_EMPHASIS,
};

/// Additive floor inside the log.
pub const LOG_FLOOR: f32 = 1e-6;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("normalization needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("unknown feature kind '{0}' (expected sftf, logmel, gammatone or cqt)")]
    UnknownKind(String),
    #[error("feature dump: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed feature dump: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Sftf,
    LogMel,
    Gammatone,
    #[default]
    Cqt,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 4] =
        [FeatureKind::Sftf, FeatureKind::LogMel, FeatureKind::Gammatone, FeatureKind::Cqt];

    pub fn code(self) -> u8 {
        match self {
            FeatureKind::Sftf => 0,
            FeatureKind::LogMel => 1,
            FeatureKind::Gammatone => 2,
            FeatureKind::Cqt => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Sftf => "sftf",
            FeatureKind::LogMel => "logmel",
            FeatureKind::Gammatone => "gammatone",
            FeatureKind::Cqt => "cqt",
        }
    }

    /// The 96-row bank for this kind.
    pub fn bank(self) -> FilterBank {
        match self {
            FeatureKind::Sftf => linear_bank(N_BANDS),
            FeatureKind::LogMel => mel_bank(N_BANDS, 0.0, 8000.0),
            FeatureKind::Gammatone => gammatone_bank(N_BANDS, GAMMATONE_MIN_HZ, 8000.0),
            FeatureKind::Cqt => cqt_bank(CQT_OCTAVES, CQT_BINS_PER_OCTAVE, CQT_MIN_HZ),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "sftf" | "stft" => Ok(FeatureKind::Sftf),
            "logmel" | "mel" => Ok(FeatureKind::LogMel),
            "gammatone" | "gt" => Ok(FeatureKind::Gammatone),
            "cqt" => Ok(FeatureKind::Cqt),
            _ => Err(FeatureError::UnknownKind(s.to_string())),
        }
    }
}

/// Row-major `rows × cols` (bands × frames) feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f32>,
    rows: usize,
    cols: usize,
    kind: FeatureKind,
    normalized: bool,
}

impl FeatureMatrix {
    pub fn new(
        values: Vec<f32>,
        rows: usize,
        cols: usize,
        kind: FeatureKind,
        normalized: bool,
    ) -> Result<Self, FeatureError> {
        if values.len() != rows * cols {
            return Err(FeatureError::Shape(format!(
                "{} values for a {rows} × {cols} matrix",
                values.len()
            )));
        }
        Ok(Self { values, rows, cols, kind, normalized })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.values[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }
}

/// `bank.weights × spec`, optionally followed by `ln(1e−6 + x)`.
pub fn apply_bank(
    spec: &MagnitudeSpectrogram,
    bank: &FilterBank,
    log_compress: bool,
    kind: FeatureKind,
) -> Result<FeatureMatrix, FeatureError> {
    if spec.bins() != BINS || bank.weights().len() != bank.rows() * BINS {
        return Err(FeatureError::Shape(format!(
            "bank {} × {} vs spectrogram {} × {}",
            bank.rows(),
            bank.weights().len() / bank.rows().max(1),
            spec.bins(),
            spec.frames()
        )));
    }
    let (rows, cols) = (bank.rows(), spec.frames());
    // f64 accumulation keeps the product linear to within output rounding.
    let w: Vec<f64> = bank.weights().iter().map(|&x| x as f64).collect();
    let s: Vec<f64> = spec.values().iter().map(|&x| x as f64).collect();
    let mut acc = vec![0.0f64; rows * cols];
    crate::nn::matmul(rows, BINS, cols, &w, &s, &mut acc, false);
    let values = acc
        .into_iter()
        .map(|v| if log_compress { (LOG_FLOOR as f64 + v).ln() as f32 } else { v as f32 })
        .collect();
    FeatureMatrix::new(values, rows, cols, kind, false)
}

/// 257 linear bins pooled into 96 triangular bands, log-compressed.
pub fn sftf_96(spec: &MagnitudeSpectrogram) -> FeatureMatrix {
    apply_bank(spec, &linear_bank(N_BANDS), true, FeatureKind::Sftf)
        .expect("linear bank matches the STFT shape")
}

/// Per-row standardization across frames; zero-variance rows become 0.
pub fn normalize(feat: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
    if feat.cols < 2 {
        return Err(FeatureError::TooFewFrames(feat.cols));
    }
    let mut values = feat.values.clone();
    for row in values.chunks_mut(feat.cols) {
        let n = row.len() as f64;
        let mean = row.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = row.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if std <= 1e-9 * (1.0 + mean.abs()) {
            row.fill(0.0);
        } else {
            for v in row.iter_mut() {
                *v = ((*v as f64 - mean) / std) as f32;
            }
        }
    }
    FeatureMatrix::new(values, feat.rows, feat.cols, feat.kind, true)
}

/// Shared, immutable STFT plan plus the bank for one feature kind.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    kind: FeatureKind,
    bank: FilterBank,
    stft: Stft,
}

impl FeatureExtractor {
    pub fn new(kind: FeatureKind) -> Self {
        Self { kind, bank: kind.bank(), stft: Stft::new() }
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    /// Pre-emphasis, STFT magnitude, bank and log compression; not normalized.
    pub fn extract(&self, samples: &[f32]) -> FeatureMatrix {
        let emphasized = pre_emphasis(samples, PRE_EMPHASIS);
        let spec = self.stft.magnitude(&emphasized);
        apply_bank(&spec, &self.bank, true, self.kind).expect("bank matches the STFT shape")
    }

    /// `extract` followed by per-bin normalization, the network's input.
    pub fn extract_normalized(&self, samples: &[f32]) -> Result<FeatureMatrix, FeatureError> {
        normalize(&self.extract(samples))
    }
}

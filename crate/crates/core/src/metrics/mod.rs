//! Diarization error rate with a forgiveness collar, and RTTM interchange.
//!
//! DER = (E_Spk + E_FA + E_Miss) / scored reference speech time, with the
//! hypothesis labels mapped one-to-one onto reference labels so as to
//! maximize their overlap.

mod der;
mod hungarian;
mod oracle;
mod rttm;

use std::path::PathBuf;

use thiserror::Error;

pub use der::{der, der_totals, optimal_mapping, overlap_matrix, DerReport, DerTotals};
pub use hungarian::{assignment_weight, max_weight_assignment};
pub use oracle::{frame_der_oracle, ORACLE_MAX_SPEAKERS};
pub use rttm::{format_rttm, parse_rttm, read_rttm, write_rttm};

/// Default forgiveness collar around reference boundaries, in seconds.
pub const DEFAULT_COLLAR: f64 = 0.25;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("reference has no scored speech")]
    EmptyReference,
    #[error("reference file '{reference}' scored against hypothesis file '{hypothesis}'")]
    FileMismatch { reference: String, hypothesis: String },
    #[error("collar must be a non-negative number of seconds, got {0}")]
    Collar(f64),
    #[error("frame oracle supports at most {ORACLE_MAX_SPEAKERS} speakers per side, got {0}")]
    TooManySpeakers(usize),
    #[error("RTTM line {line}: {message}")]
    Rttm { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

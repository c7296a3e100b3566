//! Speaker diarization built on recurrent convolutional speaker embeddings.
//!
//! The crate covers the whole path from a WAV file to a scored diarization:
//!
//! * [`audio`]: WAV ingestion, mono mixdown, resampling, 3.072 s segmentation
//! * [`features`]: STFT front end and the four 96-band spectrogram kinds
//! * [`nn`]: layer kernels with explicit, gradient-checked backward passes
//! * [`model`]: the R-CNN speaker classifier, its training loop and checkpoints
//! * [`tracker`]: activation embeddings and online cosine-threshold speaker tracking
//! * [`pipeline`]: windowed diarization of a stream into a [`pipeline::Timeline`]
//! * [`metrics`]: DER scoring with a forgiveness collar, RTTM I/O
//! * [`synth`]: deterministic synthetic speakers for training and acceptance runs
//! * [`cli`]: the `diarkit` command line

pub mod nn;
pub mod audio;
pub mod features;
pub mod model;
pub mod pipeline;
pub mod synth;
pub mod tracker;
pub mod metrics;
pub mod cli;

use std::io::{Read, Seek, Write};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{clamp_samples, AudioBuffer, AudioError};

fn map_open_error(path: &str, err: hound::Error) -> AudioError {
    match err {
        hound::Error::IoError(e) if matches!(e.kind(), std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied) => {
            AudioError::Unreadable { path: path.to_string(), source: e }
        }
        hound::Error::IoError(e) => AudioError::Malformed(format!("{path}: header ends early ({e})")),
        hound::Error::Unsupported => AudioError::UnsupportedEncoding(format!("{path}: unsupported format")),
        hound::Error::FormatError(msg) => AudioError::Malformed(format!("{path}: {msg}")),
        other => AudioError::UnsupportedEncoding(format!("{path}: {other}")),
    }
}

fn collect<S, R>(reader: &mut WavReader<R>, scale: f32) -> Result<Vec<f32>, AudioError>
where
    S: hound::Sample + Into<f64>,
    R: Read,
{
    let expected = reader.len() as usize;
    let mut out = Vec::with_capacity(expected);
    for s in reader.samples::<S>() {
        match s {
            Ok(v) => out.push((v.into() / scale as f64) as f32),
            // a short read inside the data chunk
            Err(hound::Error::IoError(_)) => {
                return Err(AudioError::Truncated { samples_read: out.len(), expected });
            }
            Err(e) => return Err(AudioError::Malformed(e.to_string())),
        }
    }
    Ok(out)
}

/// Decodes a RIFF/WAVE stream.
///
/// Integer PCM of 8, 16, 24 or 32 bits is scaled by `2^(bits−1)`, so the most
/// negative code maps to exactly −1. Float samples are taken as is. Anything
/// outside `[-1, 1]` is clamped; the number of clamped samples is returned
/// alongside the buffer.
pub fn read_wav<R: Read>(source: R, name: &str) -> Result<(AudioBuffer, usize), AudioError> {
    let mut reader = WavReader::new(source).map_err(|e| map_open_error(name, e))?;
    let spec = reader.spec();
    let mut samples = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 8) => collect::<i8, _>(&mut reader, 128.0)?,
        (SampleFormat::Int, 16) => collect::<i16, _>(&mut reader, 32768.0)?,
        (SampleFormat::Int, 24) => collect::<i32, _>(&mut reader, 8_388_608.0)?,
        (SampleFormat::Int, 32) => collect::<i32, _>(&mut reader, 2_147_483_648.0)?,
        (SampleFormat::Float, 32) => collect::<f32, _>(&mut reader, 1.0)?,
        (fmt, bits) => {
            return Err(AudioError::UnsupportedEncoding(format!("{name}: {bits}-bit {fmt:?}")));
        }
    };
    let clipped = clamp_samples(&mut samples);
    if clipped > 0 {
        log::warn!("{name}: clamped {clipped} samples to [-1, 1]");
    }
    let buffer = AudioBuffer::interleaved(samples, spec.sample_rate, spec.channels)?;
    Ok((buffer, clipped))
}

/// Loads a WAV file, keeping its channel count and rate.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, AudioError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| AudioError::Unreadable { path: name.clone(), source })?;
    Ok(read_wav(std::io::BufReader::new(file), &name)?.0)
}

/// Encodes as 32-bit float WAV, which reloads bit-identically.
pub fn write_wav<W: Write + Seek>(buffer: &AudioBuffer, sink: W) -> Result<(), AudioError> {
    let spec = WavSpec {
        channels: buffer.channels(),
        sample_rate: buffer.sample_rate(),
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::new(sink, spec).map_err(|e| AudioError::Write(e.to_string()))?;
    for &s in buffer.samples() {
        writer.write_sample(s).map_err(|e| AudioError::Write(e.to_string()))?;
    }
    writer.finalize().map_err(|e| AudioError::Write(e.to_string()))
}

pub fn save_wav(buffer: &AudioBuffer, path: impl AsRef<Path>) -> Result<(), AudioError> {
    let file = std::fs::File::create(path.as_ref()).map_err(|e| AudioError::Write(e.to_string()))?;
    write_wav(buffer, std::io::BufWriter::new(file))
}

/// Writes 16-bit PCM, rounding to the nearest code.
pub fn save_wav_pcm16(buffer: &AudioBuffer, path: impl AsRef<Path>) -> Result<(), AudioError> {
    let spec = WavSpec {
        channels: buffer.channels(),
        sample_rate: buffer.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path.as_ref(), spec).map_err(|e| AudioError::Write(e.to_string()))?;
    for &s in buffer.samples() {
        let code = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(code).map_err(|e| AudioError::Write(e.to_string()))?;
    }
    writer.finalize().map_err(|e| AudioError::Write(e.to_string()))
}

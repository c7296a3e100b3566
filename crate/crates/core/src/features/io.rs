use std::io::{Read, Write};

use super::{FeatureError, FeatureKind, FeatureMatrix};

/// Little-endian `{kind: u8, rows: u32, cols: u32}` header, then row-major f32 values.
pub fn write_binary<W: Write>(feat: &FeatureMatrix, mut out: W) -> Result<(), FeatureError> {
    out.write_all(&[feat.kind().code()])?;
    out.write_all(&(feat.rows() as u32).to_le_bytes())?;
    out.write_all(&(feat.cols() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(feat.values().len() * 4);
    for v in feat.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Inverse of [`write_binary`]; the normalization flag is not stored and reads back as `false`.
pub fn read_binary<R: Read>(mut input: R) -> Result<FeatureMatrix, FeatureError> {
    let mut header = [0u8; 9];
    input
        .read_exact(&mut header)
        .map_err(|_| FeatureError::Malformed("header shorter than 9 bytes".into()))?;
    let kind = FeatureKind::from_code(header[0])
        .ok_or_else(|| FeatureError::Malformed(format!("unknown kind code {}", header[0])))?;
    let rows = u32::from_le_bytes(header[1..5].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[5..9].try_into().unwrap()) as usize;
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != rows * cols * 4 {
        return Err(FeatureError::Malformed(format!(
            "{} payload bytes for a {rows} × {cols} matrix",
            body.len()
        )));
    }
    let values = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    FeatureMatrix::new(values, rows, cols, kind, false)
}

/// One line per band, comma-separated frames.
pub fn write_csv<W: Write>(feat: &FeatureMatrix, mut out: W) -> Result<(), FeatureError> {
    for r in 0..feat.rows() {
        let line: Vec<String> = feat.row(r).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

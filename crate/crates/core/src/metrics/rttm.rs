use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::MetricsError;
use crate::pipeline::{Timeline, Turn};

/// Parses RTTM `SPEAKER` records into one timeline per file id, in order of
/// first appearance. Other record types, `;;` comments and blank lines are
/// skipped. Overlapping turns of one speaker are merged.
pub fn parse_rttm(text: &str) -> Result<Vec<Timeline>, MetricsError> {
    let mut files: Vec<String> = Vec::new();
    let mut turns: BTreeMap<usize, Vec<Turn>> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with(";;") || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] != "SPEAKER" {
            continue;
        }
        let bad = |msg: String| MetricsError::Rttm { line: line_no, message: msg };
        if fields.len() < 8 {
            return Err(bad(format!("expected at least 8 fields, found {}", fields.len())));
        }
        let number = |s: &str, what: &str| -> Result<f64, MetricsError> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("{what} '{s}' is not a number")))
        };
        let tbeg = number(fields[3], "onset")?;
        let tdur = number(fields[4], "duration")?;
        if tbeg < 0.0 {
            return Err(bad(format!("negative onset {tbeg}")));
        }
        if tdur <= 0.0 {
            return Err(bad(format!("non-positive duration {tdur}")));
        }
        let start_us = (tbeg * 1e6).round();
        let end_us = start_us + (tdur * 1e6).round();
        let file = fields[1].to_string();
        let idx = match files.iter().position(|f| *f == file) {
            Some(i) => i,
            None => {
                files.push(file);
                files.len() - 1
            }
        };
        turns.entry(idx).or_default().push(Turn::new(start_us / 1e6, end_us / 1e6, fields[7]));
    }
    files
        .into_iter()
        .enumerate()
        .map(|(i, file)| {
            let merged = merge_self_overlaps(turns.remove(&i).unwrap_or_default());
            Timeline::from_unsorted(file, merged).map_err(|e| MetricsError::Rttm { line: 0, message: e.to_string() })
        })
        .collect()
}

fn merge_self_overlaps(mut turns: Vec<Turn>) -> Vec<Turn> {
    turns.sort_by(|a, b| a.speaker.cmp(&b.speaker).then(a.start.total_cmp(&b.start)));
    let mut out: Vec<Turn> = Vec::with_capacity(turns.len());
    for t in turns {
        match out.last_mut() {
            Some(last) if last.speaker == t.speaker && t.start < last.end => last.end = last.end.max(t.end),
            _ => out.push(t),
        }
    }
    out
}

pub fn read_rttm(path: impl AsRef<Path>) -> Result<Vec<Timeline>, MetricsError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MetricsError::Io { path: path.to_path_buf(), source })?;
    parse_rttm(&text).map_err(|e| match e {
        MetricsError::Rttm { line, message } => MetricsError::Rttm { line, message: format!("{}: {message}", path.display()) },
        other => other,
    })
}

/// One `SPEAKER` line per turn, times rounded to whole milliseconds.
pub fn format_rttm(timeline: &Timeline) -> String {
    let mut out = String::new();
    for t in timeline.turns() {
        let start_ms = (t.start * 1e3).round() as i64;
        let end_ms = ((t.end * 1e3).round() as i64).max(start_ms + 1);
        let _ = writeln!(
            out,
            "SPEAKER {} 1 {}.{:03} {}.{:03} <NA> <NA> {} <NA> <NA>",
            timeline.file_id(),
            start_ms / 1000,
            start_ms % 1000,
            (end_ms - start_ms) / 1000,
            (end_ms - start_ms) % 1000,
            t.speaker
        );
    }
    out
}

pub fn write_rttm(timeline: &Timeline, path: impl AsRef<Path>) -> Result<(), MetricsError> {
    let path = path.as_ref();
    fs::write(path, format_rttm(timeline)).map_err(|source| MetricsError::Io { path: path.to_path_buf(), source })
}

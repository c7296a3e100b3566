use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Test,
}

impl FromStr for SplitTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitTag::Train),
            "test" => Ok(SplitTag::Test),
            other => Err(format!("split tag must be 'train' or 'test', got '{other}'")),
        }
    }
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitTag::Train => "train",
            SplitTag::Test => "test",
        })
    }
}

/// Where a record's speaker labels come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// The whole file is one speaker.
    Label(String),
    /// Speaker turns from an RTTM file.
    Rttm(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub line: usize,
    pub wav: PathBuf,
    pub source: Source,
    pub split: Option<SplitTag>,
}

/// Tab-separated `wav  label|file.rttm  [train|test]` records; `#` starts a
/// comment. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn parse(text: &str, base: &Path, origin: &str) -> Result<Self, CliError> {
        let mut records = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split('\t').map(str::trim).filter(|f| !f.is_empty()).collect();
            let err = |m: String| CliError::Data(format!("{origin}:{line}: {m}"));
            if !(2..=3).contains(&fields.len()) {
                return Err(err(format!("expected 2 or 3 tab-separated fields, found {}", fields.len())));
            }
            let resolve = |p: &str| {
                let p = PathBuf::from(p);
                if p.is_absolute() {
                    p
                } else {
                    base.join(p)
                }
            };
            let source = if fields[1].to_ascii_lowercase().ends_with(".rttm") {
                Source::Rttm(resolve(fields[1]))
            } else {
                Source::Label(fields[1].to_string())
            };
            let split = fields.get(2).map(|t| t.parse::<SplitTag>()).transpose().map_err(err)?;
            records.push(ManifestRecord { line, wav: resolve(fields[0]), source, split });
        }
        if records.is_empty() {
            return Err(CliError::Data(format!("{origin}: manifest has no records")));
        }
        Ok(Self { records })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let m = Self::parse(&text, base, &path.display().to_string())?;
        for r in &m.records {
            let missing = |p: &Path| CliError::Io(format!("{}:{}: no such file {}", path.display(), r.line, p.display()));
            if !r.wav.is_file() {
                return Err(missing(&r.wav));
            }
            if let Source::Rttm(p) = &r.source {
                if !p.is_file() {
                    return Err(missing(p));
                }
            }
        }
        Ok(m)
    }

    pub fn is_tagged(&self) -> bool {
        self.records.iter().any(|r| r.split.is_some())
    }

    /// Labels named directly in the manifest, sorted; RTTM labels are only
    /// known once the files are read.
    pub fn direct_labels(&self) -> BTreeSet<String> {
        self.records
            .iter()
            .filter_map(|r| match &r.source {
                Source::Label(l) => Some(l.clone()),
                Source::Rttm(_) => None,
            })
            .collect()
    }
}

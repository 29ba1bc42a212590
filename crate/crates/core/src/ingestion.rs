//! Manifest-driven loading of multi-channel recordings.
//!
//! A manifest is a TOML file with one `[[trial]]` table per recording:
//!
//! ```toml
//! [[trial]]
//! path = "s01/grasp03_rep1.csv"   # relative to the manifest's directory
//! subject = "s01"                 # string or integer
//! activity = 3
//! trial = 1
//! sample_rate = 2000.0            # Hz
//! channel_count = 12
//! window = [6000, 16000]          # optional, half-open sample range
//! ```
//!
//! Trial files are delimited text (comma or tab, detected from the first
//! line), one row per time sample and one column per channel. No filtering,
//! rectification or normalization is applied.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
enum Identifier {
    Text(String),
    Number(i64),
}

impl From<Identifier> for String {
    fn from(id: Identifier) -> String {
        match id {
            Identifier::Text(s) => s,
            Identifier::Number(n) => n.to_string(),
        }
    }
}

fn deserialize_id<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    Identifier::deserialize(d).map(String::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: PathBuf,
    #[serde(deserialize_with = "deserialize_id")]
    pub subject: String,
    #[serde(deserialize_with = "deserialize_id")]
    pub activity: String,
    #[serde(deserialize_with = "deserialize_id")]
    pub trial: String,
    pub sample_rate: f64,
    pub channel_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[usize; 2]>,
}

impl ManifestEntry {
    pub fn key(&self) -> (&str, &str, &str) {
        (&self.subject, &self.activity, &self.trial)
    }

    /// Window length in seconds, if a window is set.
    pub fn window_seconds(&self) -> Option<f64> {
        self.window
            .map(|[start, end]| (end - start) as f64 / self.sample_rate)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    #[serde(default, rename = "trial")]
    entries: Vec<ManifestEntry>,
}

/// Validated manifest. Entry paths are resolved against the manifest's directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SignalManifest {
    pub entries: Vec<ManifestEntry>,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

// 1-based line of the `index`-th `[[trial]]` header, for error context.
fn line_of_entry(text: &str, index: usize) -> Option<usize> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| l.trim_start().starts_with("[[trial]]"))
        .nth(index)
        .map(|(i, _)| i + 1)
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<SignalManifest> {
    let file: ManifestFile = toml::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.span().map(|s| line_of_offset(text, s.start)),
        message: e.message().to_string(),
    })?;

    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut seen = HashSet::new();
    let mut entries = Vec::with_capacity(file.entries.len());
    for (i, mut entry) in file.entries.into_iter().enumerate() {
        let invalid = |field: &str, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_of_entry(text, i),
            message: format!("trial #{} field `{field}`: {msg}", i + 1),
        };
        if !(entry.sample_rate > 0.0 && entry.sample_rate.is_finite()) {
            return Err(invalid("sample_rate", format!("{} is not positive", entry.sample_rate)));
        }
        if entry.channel_count == 0 {
            return Err(invalid("channel_count", "must be at least 1".into()));
        }
        if let Some([start, end]) = entry.window {
            if start >= end {
                return Err(invalid("window", format!("start {start} is not before end {end}")));
            }
        }
        let key = (entry.subject.clone(), entry.activity.clone(), entry.trial.clone());
        if !seen.insert(key) {
            return Err(Error::DuplicateKey {
                subject: entry.subject,
                activity: entry.activity,
                trial: entry.trial,
            });
        }
        if entry.path.is_relative() {
            entry.path = base.join(&entry.path);
        }
        entries.push(entry);
    }
    Ok(SignalManifest { entries })
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<SignalManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path)
}

/// One loaded recording; `channels[c][t]` is channel `c` at sample `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub meta: ManifestEntry,
    pub channels: Vec<Vec<f64>>,
}

impl TrialRecord {
    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn sample_count(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }
}

fn detect_delimiter(text: &str) -> u8 {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

/// Reads a delimited numeric file into a channel-major matrix.
///
/// `expected_columns` of `None` takes the column count from the first row.
pub fn read_matrix(path: &Path, header: bool, expected_columns: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .delimiter(detect_delimiter(&text))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut channels: Vec<Vec<f64>> = Vec::new();
    let mut columns = expected_columns;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map(|p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let width = *columns.get_or_insert(record.len());
        if record.len() != width {
            return Err(Error::ShapeMismatch {
                path: path.to_path_buf(),
                line,
                expected: width,
                actual: record.len(),
            });
        }
        if channels.is_empty() {
            channels = vec![Vec::new(); width];
        }
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: Some(line),
                message: format!("column {}: `{cell}` is not a number", c + 1),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFiniteSample {
                    index: channels[c].len(),
                    value,
                });
            }
            channels[c].push(value);
        }
    }
    if channels.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: None,
            message: "no data rows".into(),
        });
    }
    Ok(channels)
}

/// Loads one manifest entry, applying its window before anything else.
pub fn load_trial(entry: &ManifestEntry, header: bool) -> Result<TrialRecord> {
    let mut channels = read_matrix(&entry.path, header, Some(entry.channel_count))?;
    if let Some([start, end]) = entry.window {
        let rows = channels[0].len();
        if end > rows {
            return Err(Error::WindowOutOfRange {
                path: entry.path.clone(),
                start,
                end,
                rows,
            });
        }
        for ch in &mut channels {
            ch.truncate(end);
            ch.drain(..start);
        }
    }
    Ok(TrialRecord {
        meta: entry.clone(),
        channels,
    })
}

/// Writes a channel-major matrix as comma-delimited text with 17 significant
/// digits, which reads back bit-exact.
pub fn write_matrix(path: &Path, channels: &[Vec<f64>]) -> Result<()> {
    let rows = channels.first().map_or(0, Vec::len);
    if channels.iter().any(|c| c.len() != rows) {
        return Err(Error::InvalidParameter("channels have different lengths".into()));
    }
    let mut out = String::with_capacity(rows * channels.len() * 24);
    for t in 0..rows {
        for (c, ch) in channels.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{:.16e}", ch[t]).expect("writing to a String");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn channel_energy(samples: &[f64]) -> f64 {
    samples.iter().map(|x| x * x).sum()
}

/// Index and samples of the channel with the largest Σ x²; ties go to the lowest index.
pub fn select_max_energy_channel(rec: &TrialRecord) -> (usize, &[f64]) {
    select_max_energy(&rec.channels)
}

pub fn select_max_energy(channels: &[Vec<f64>]) -> (usize, &[f64]) {
    let mut best = 0;
    let mut best_energy = f64::NEG_INFINITY;
    for (i, ch) in channels.iter().enumerate() {
        let e = channel_energy(ch);
        if e > best_energy {
            best = i;
            best_energy = e;
        }
    }
    (best, &channels[best])
}

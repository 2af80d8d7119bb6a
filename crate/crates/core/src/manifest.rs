//! Line-delimited JSON corpus manifests.
//!
//! Each line holds one utterance:
//!
//! ```text
//! {"id":"spk1_0001","speaker":"spk1","duration_sec":3.2,"phonemes":["a","k","i"],"text":"aki"}
//! ```
//!
//! Record `i` of a [`Manifest`] is line `i + 1` of the file, and row `i` of
//! every feature file paired with it.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("manifest contains no records")]
    Empty,
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?} (first seen on line {first_line})")]
    DuplicateId {
        id: String,
        line: usize,
        first_line: usize,
    },
    #[error("line {line}: record {id:?} has non-positive duration_sec {value}")]
    NonPositiveDuration { line: usize, id: String, value: f64 },
    #[error("line {line}: record {id:?}: {reason}")]
    InvalidRecord {
        line: usize,
        id: String,
        reason: String,
    },
    #[error("index {index} out of range for manifest of {len} records")]
    IndexOutOfRange { index: usize, len: usize },
}

/// One corpus item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub id: String,
    pub speaker: String,
    pub duration_sec: f64,
    #[serde(default)]
    pub phonemes: Vec<String>,
    /// Carried through for humans; no objective reads it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl UtteranceRecord {
    fn check(&self, line: usize) -> Result<(), ManifestError> {
        let invalid = |reason: &str| ManifestError::InvalidRecord {
            line,
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.is_empty() {
            return Err(invalid("empty id"));
        }
        if self.speaker.is_empty() {
            return Err(invalid("empty speaker label"));
        }
        if !self.duration_sec.is_finite() {
            return Err(invalid("duration_sec is not finite"));
        }
        if self.duration_sec <= 0.0 {
            return Err(ManifestError::NonPositiveDuration {
                line,
                id: self.id.clone(),
                value: self.duration_sec,
            });
        }
        for token in &self.phonemes {
            if token.is_empty() {
                return Err(invalid("empty phoneme token"));
            }
            if token.chars().any(char::is_whitespace) {
                return Err(invalid(&format!(
                    "phoneme token {token:?} contains whitespace"
                )));
            }
        }
        Ok(())
    }
}

/// An ordered, validated set of utterance records.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    records: Vec<UtteranceRecord>,
    phoneme_inventory: Vec<String>,
    speaker_inventory: Vec<String>,
    total_duration: f64,
}

impl Manifest {
    /// Validates `records` and derives the inventories. Errors report the
    /// 1-based position of the offending record as its line number.
    pub fn from_records(records: Vec<UtteranceRecord>) -> Result<Self, ManifestError> {
        if records.is_empty() {
            return Err(ManifestError::Empty);
        }
        let mut seen: HashMap<&str, usize> = HashMap::with_capacity(records.len());
        let mut phonemes = BTreeSet::new();
        let mut speakers = BTreeSet::new();
        let mut total_duration = 0.0;
        for (i, record) in records.iter().enumerate() {
            let line = i + 1;
            record.check(line)?;
            if let Some(&first_line) = seen.get(record.id.as_str()) {
                return Err(ManifestError::DuplicateId {
                    id: record.id.clone(),
                    line,
                    first_line,
                });
            }
            seen.insert(&record.id, line);
            speakers.insert(record.speaker.as_str());
            phonemes.extend(record.phonemes.iter().map(String::as_str));
            total_duration += record.duration_sec;
        }
        let phoneme_inventory = phonemes.into_iter().map(str::to_owned).collect();
        let speaker_inventory = speakers.into_iter().map(str::to_owned).collect();
        Ok(Manifest {
            records,
            phoneme_inventory,
            speaker_inventory,
            total_duration,
        })
    }

    pub fn records(&self) -> &[UtteranceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, index: usize) -> Result<&UtteranceRecord, ManifestError> {
        self.records
            .get(index)
            .ok_or(ManifestError::IndexOutOfRange {
                index,
                len: self.records.len(),
            })
    }

    /// Distinct phoneme tokens, sorted by code point.
    pub fn phoneme_inventory(&self) -> &[String] {
        &self.phoneme_inventory
    }

    /// Distinct speaker labels, sorted by code point.
    pub fn speaker_inventory(&self) -> &[String] {
        &self.speaker_inventory
    }

    /// Duration of the whole corpus in seconds.
    pub fn total_duration(&self) -> f64 {
        self.total_duration
    }

    /// Sum of `duration_sec` over `indices`; the empty set sums to zero.
    pub fn duration_of(&self, indices: &[usize]) -> Result<f64, ManifestError> {
        indices
            .iter()
            .map(|&i| self.get(i).map(|r| r.duration_sec))
            .sum()
    }

    pub fn durations(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.duration_sec).collect()
    }

    pub fn position_of(&self, id: &str) -> Option<usize> {
        self.records.iter().position(|r| r.id == id)
    }

    /// SHA-256 over the canonical serialization of every record. Two
    /// manifests with the same fingerprint describe the same corpus in the
    /// same order.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for record in &self.records {
            let line = serde_json::to_string(record).expect("record serializes");
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

/// Reads a manifest, keeping records in file order.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, ManifestError> {
    let path = path.as_ref();
    let io_err = |source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    read_manifest(BufReader::new(file)).map_err(|e| match e {
        ManifestError::Io { source, .. } => io_err(source),
        other => other,
    })
}

pub fn read_manifest<R: BufRead>(reader: R) -> Result<Manifest, ManifestError> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| ManifestError::Io {
            path: PathBuf::new(),
            source,
        })?;
        if line.trim().is_empty() {
            return Err(ManifestError::Malformed {
                line: line_no,
                message: "blank line".into(),
            });
        }
        let record: UtteranceRecord =
            serde_json::from_str(&line).map_err(|e| ManifestError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Manifest::from_records(records)
}

pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for record in manifest.records() {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

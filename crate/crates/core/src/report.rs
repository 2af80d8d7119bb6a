//! Subset metrics and report documents.
//!
//! Reports are single-line JSON objects (the same syntax as manifest lines)
//! carrying `report_version` = [`REPORT_VERSION`]. Entropies use base 2.
//! Mean pairwise squared distance is `V(S) / (n(n − 1))` for `n ≥ 2`, i.e.
//! the average over ordered pairs of distinct records, and 0 otherwise.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diversity::MomentAccumulator;
use crate::features::FeatureMatrix;
use crate::manifest::{Manifest, ManifestError};
use crate::selectors::{CountTable, Method, OverflowPolicy, SelectionResult};

pub const REPORT_VERSION: u32 = 1;
pub const ENTROPY_BASE: f64 = 2.0;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("index {0} appears more than once")]
    DuplicateIndex(usize),
    #[error("feature rows ({features}) do not match manifest records ({manifest})")]
    RowMismatch { features: usize, manifest: usize },
    #[error("{method} result was produced from a different manifest")]
    ManifestMismatch { method: String },
    #[error("selected id {id:?} does not match manifest record {index}")]
    IdMismatch { index: usize, id: String },
    #[error("unsupported report_version {0}")]
    UnsupportedVersion(u32),
    #[error("invalid report: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Quality measures of one subset. Pure function of manifest, features and
/// indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetMetrics {
    pub n_utterances: usize,
    pub total_duration_sec: f64,
    pub n_speakers: usize,
    pub phoneme_entropy: f64,
    pub speaker_entropy: f64,
    /// Distinct phonemes in the subset over distinct phonemes in the corpus.
    pub phoneme_coverage: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diversity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_pairwise_sq_distance: Option<f64>,
}

pub fn evaluate_subset(
    manifest: &Manifest,
    features: Option<&FeatureMatrix>,
    indices: &[usize],
) -> Result<SubsetMetrics, ReportError> {
    let mut seen = HashSet::with_capacity(indices.len());
    for &i in indices {
        manifest.get(i)?;
        if !seen.insert(i) {
            return Err(ReportError::DuplicateIndex(i));
        }
    }
    if let Some(f) = features {
        if f.rows() != manifest.len() {
            return Err(ReportError::RowMismatch {
                features: f.rows(),
                manifest: manifest.len(),
            });
        }
    }

    let counts = CountTable::from_indices(manifest, indices)?;
    let inventory = manifest.phoneme_inventory().len();
    let phoneme_coverage = if inventory == 0 {
        0.0
    } else {
        counts.phoneme_counts.len() as f64 / inventory as f64
    };

    let (diversity, mean_pairwise_sq_distance) = match features {
        Some(f) => {
            let acc = MomentAccumulator::from_rows(f.dim(), indices.iter().map(|&i| f.row(i)))
                .expect("rows share the matrix dimension");
            let v = acc.diversity_total();
            let n = indices.len() as f64;
            let mean = if indices.len() >= 2 {
                v / (n * (n - 1.0))
            } else {
                0.0
            };
            (Some(v), Some(mean))
        }
        None => (None, None),
    };

    Ok(SubsetMetrics {
        n_utterances: indices.len(),
        total_duration_sec: manifest.duration_of(indices)?,
        n_speakers: counts.speaker_counts.len(),
        phoneme_entropy: counts.phoneme_entropy(ENTROPY_BASE),
        speaker_entropy: counts.speaker_entropy(ENTROPY_BASE),
        phoneme_coverage,
        diversity,
        mean_pairwise_sq_distance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedItem {
    pub index: usize,
    pub id: String,
    pub objective: Option<f64>,
    pub cumulative_duration_sec: f64,
}

/// Serialized form of a [`SelectionResult`] plus its metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub report_version: u32,
    pub method: Method,
    pub seed: u64,
    pub t_max_sec: f64,
    pub overflow_policy: OverflowPolicy,
    pub entropy_base: f64,
    pub manifest_fingerprint: String,
    pub n_records: usize,
    pub selected: Vec<SelectedItem>,
    pub metrics: SubsetMetrics,
}

impl SelectionReport {
    pub fn new(
        result: &SelectionResult,
        manifest: &Manifest,
        features: Option<&FeatureMatrix>,
    ) -> Result<Self, ReportError> {
        let metrics = evaluate_subset(manifest, features, &result.indices)?;
        let selected = result
            .per_step
            .iter()
            .map(|s| SelectedItem {
                index: s.index,
                id: manifest.records()[s.index].id.clone(),
                objective: s.objective,
                cumulative_duration_sec: s.cumulative_duration,
            })
            .collect();
        Ok(SelectionReport {
            report_version: REPORT_VERSION,
            method: result.method,
            seed: result.seed,
            t_max_sec: result.t_max,
            overflow_policy: result.overflow_policy,
            entropy_base: ENTROPY_BASE,
            manifest_fingerprint: result.manifest_fingerprint.clone(),
            n_records: manifest.len(),
            selected,
            metrics,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ReportError> {
        let report: SelectionReport = serde_json::from_str(text.trim())?;
        if report.report_version != REPORT_VERSION {
            return Err(ReportError::UnsupportedVersion(report.report_version));
        }
        Ok(report)
    }

    pub fn to_json_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn indices(&self) -> Vec<usize> {
        self.selected.iter().map(|s| s.index).collect()
    }

    /// Indices of the selection after checking that the ids still name the
    /// same records of `manifest`.
    pub fn indices_in(&self, manifest: &Manifest) -> Result<Vec<usize>, ReportError> {
        for item in &self.selected {
            let record = manifest.get(item.index)?;
            if record.id != item.id {
                return Err(ReportError::IdMismatch {
                    index: item.index,
                    id: item.id.clone(),
                });
            }
        }
        Ok(self.indices())
    }

    pub fn into_result(self) -> SelectionResult {
        SelectionResult {
            method: self.method,
            indices: self.indices(),
            per_step: self
                .selected
                .iter()
                .map(|s| crate::selectors::Step {
                    index: s.index,
                    objective: s.objective,
                    cumulative_duration: s.cumulative_duration_sec,
                })
                .collect(),
            seed: self.seed,
            t_max: self.t_max_sec,
            overflow_policy: self.overflow_policy,
            manifest_fingerprint: self.manifest_fingerprint,
        }
    }
}

/// Metrics for an arbitrary subset, as written by `coreset evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub report_version: u32,
    pub entropy_base: f64,
    pub manifest_fingerprint: String,
    pub indices: Vec<usize>,
    pub metrics: SubsetMetrics,
}

impl EvaluationReport {
    pub fn new(
        manifest: &Manifest,
        features: Option<&FeatureMatrix>,
        indices: &[usize],
    ) -> Result<Self, ReportError> {
        Ok(EvaluationReport {
            report_version: REPORT_VERSION,
            entropy_base: ENTROPY_BASE,
            manifest_fingerprint: manifest.fingerprint(),
            indices: indices.to_vec(),
            metrics: evaluate_subset(manifest, features, indices)?,
        })
    }

    pub fn to_json_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub metrics: SubsetMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub report_version: u32,
    pub entropy_base: f64,
    pub rows: Vec<ComparisonRow>,
}

const CSV_HEADER: &str = "method,n_utterances,total_duration_sec,n_speakers,phoneme_entropy,\
speaker_entropy,phoneme_coverage,diversity,mean_pairwise_sq_distance";

impl ComparisonTable {
    pub fn row(&self, method: Method) -> Option<&SubsetMetrics> {
        self.rows
            .iter()
            .find(|r| r.method == method)
            .map(|r| &r.metrics)
    }

    pub fn to_json_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("table serializes");
        s.push('\n');
        s
    }

    /// Comma-separated table with a header row; absent diversity columns are
    /// left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &self.rows {
            let m = &row.metrics;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                row.method,
                m.n_utterances,
                m.total_duration_sec,
                m.n_speakers,
                m.phoneme_entropy,
                m.speaker_entropy,
                m.phoneme_coverage,
                opt(m.diversity),
                opt(m.mean_pairwise_sq_distance),
            );
        }
        out
    }
}

/// One metrics row per result, ordered by method name. All results must come
/// from `manifest`.
pub fn compare_methods(
    results: &[SelectionResult],
    manifest: &Manifest,
    features: Option<&FeatureMatrix>,
) -> Result<ComparisonTable, ReportError> {
    let fingerprint = manifest.fingerprint();
    let mut rows = Vec::with_capacity(results.len());
    for result in results {
        if result.manifest_fingerprint != fingerprint {
            return Err(ReportError::ManifestMismatch {
                method: result.method.to_string(),
            });
        }
        rows.push(ComparisonRow {
            method: result.method,
            metrics: evaluate_subset(manifest, features, &result.indices)?,
        });
    }
    rows.sort_by_key(|r| r.method.name());
    Ok(ComparisonTable {
        report_version: REPORT_VERSION,
        entropy_base: ENTROPY_BASE,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::UtteranceRecord;

    fn manifest(items: &[(&str, &[&str], f64)]) -> Manifest {
        Manifest::from_records(
            items
                .iter()
                .enumerate()
                .map(|(i, (spk, ph, d))| UtteranceRecord {
                    id: format!("u{i}"),
                    speaker: spk.to_string(),
                    duration_sec: *d,
                    phonemes: ph.iter().map(|s| s.to_string()).collect(),
                    text: None,
                })
                .collect(),
        )
        .unwrap()
    }

    fn six() -> Manifest {
        manifest(&[
            ("s1", &["a", "b"], 1.0),
            ("s1", &["a", "a"], 2.0),
            ("s2", &["c"], 1.5),
            ("s2", &["b", "c", "d"], 0.5),
            ("s3", &["a"], 1.0),
            ("s1", &[], 3.0),
        ])
    }

    #[test]
    fn full_subset_covers_inventory() {
        let m = six();
        let all: Vec<_> = (0..m.len()).collect();
        let metrics = evaluate_subset(&m, None, &all).unwrap();
        assert_eq!(metrics.phoneme_coverage, 1.0);
        assert_eq!(metrics.n_utterances, 6);
        assert_eq!(metrics.n_speakers, 3);
        assert_eq!(metrics.total_duration_sec, 9.0);
    }

    #[test]
    fn empty_subset_is_all_zero() {
        let m = six();
        let f = FeatureMatrix::new(6, 1, vec![0., 1., 2., 3., 4., 5.]).unwrap();
        let metrics = evaluate_subset(&m, Some(&f), &[]).unwrap();
        assert_eq!(
            metrics,
            SubsetMetrics {
                n_utterances: 0,
                total_duration_sec: 0.0,
                n_speakers: 0,
                phoneme_entropy: 0.0,
                speaker_entropy: 0.0,
                phoneme_coverage: 0.0,
                diversity: Some(0.0),
                mean_pairwise_sq_distance: Some(0.0),
            }
        );
    }

    #[test]
    fn entropies_match_hand_computation() {
        // Phonemes: a×4, b×2, c×2, d×1 over 9 tokens.
        // Speakers: s1×3, s2×2, s3×1 over 6 utterances.
        let m = six();
        let all: Vec<_> = (0..6).collect();
        let metrics = evaluate_subset(&m, None, &all).unwrap();
        let h = |ps: &[f64]| -ps.iter().map(|p| p * p.log2()).sum::<f64>();
        let phon = h(&[4. / 9., 2. / 9., 2. / 9., 1. / 9.]);
        let spk = h(&[3. / 6., 2. / 6., 1. / 6.]);
        assert!((metrics.phoneme_entropy - phon).abs() < 1e-12);
        assert!((metrics.speaker_entropy - spk).abs() < 1e-12);
        // Pinned: 1.8365917... and 1.4591479...
        assert!((metrics.phoneme_entropy - 1.836_591_668_108_979).abs() < 1e-9);
        assert!((metrics.speaker_entropy - 1.459_147_917_027_245).abs() < 1e-9);
    }

    #[test]
    fn diversity_and_mean_distance() {
        let m = six();
        let f = FeatureMatrix::new(6, 1, vec![0., 1., 2., 3., 4., 5.]).unwrap();
        let metrics = evaluate_subset(&m, Some(&f), &[0, 2, 5]).unwrap();
        // Points 0, 2, 5: unordered distances 4 + 25 + 9 = 38, doubled.
        assert_eq!(metrics.diversity, Some(76.0));
        assert_eq!(metrics.mean_pairwise_sq_distance, Some(76.0 / 6.0));
        let single = evaluate_subset(&m, Some(&f), &[3]).unwrap();
        assert_eq!(single.mean_pairwise_sq_distance, Some(0.0));
    }

    #[test]
    fn bad_indices() {
        let m = six();
        assert!(matches!(
            evaluate_subset(&m, None, &[6]),
            Err(ReportError::Manifest(_))
        ));
        assert!(matches!(
            evaluate_subset(&m, None, &[1, 1]),
            Err(ReportError::DuplicateIndex(1))
        ));
        let f = FeatureMatrix::new(2, 1, vec![0., 1.]).unwrap();
        assert!(matches!(
            evaluate_subset(&m, Some(&f), &[0]),
            Err(ReportError::RowMismatch { .. })
        ));
    }

    fn fake_result(m: &Manifest, method: Method, indices: Vec<usize>) -> SelectionResult {
        SelectionResult {
            method,
            per_step: indices
                .iter()
                .map(|&index| crate::selectors::Step {
                    index,
                    objective: None,
                    cumulative_duration: 0.0,
                })
                .collect(),
            indices,
            seed: 0,
            t_max: 10.0,
            overflow_policy: OverflowPolicy::StopOnFirstOverflow,
            manifest_fingerprint: m.fingerprint(),
        }
    }

    #[test]
    fn comparison_rows_are_sorted_and_label_blind() {
        let m = six();
        let results = vec![
            fake_result(&m, Method::Random, vec![0, 3]),
            fake_result(&m, Method::Diversity, vec![0, 3]),
        ];
        let table = compare_methods(&results, &m, None).unwrap();
        let names: Vec<_> = table.rows.iter().map(|r| r.method).collect();
        assert_eq!(names, [Method::Diversity, Method::Random]);
        assert_eq!(table.rows[0].metrics, table.rows[1].metrics);

        let single = compare_methods(&results[..1], &m, None).unwrap();
        assert_eq!(single.rows.len(), 1);
        let csv = single.to_csv();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().starts_with("random,2,"));
    }

    #[test]
    fn comparison_rejects_foreign_results() {
        let m = six();
        let other = manifest(&[("x", &["a"], 1.0)]);
        let results = vec![fake_result(&other, Method::Random, vec![0])];
        assert!(matches!(
            compare_methods(&results, &m, None),
            Err(ReportError::ManifestMismatch { .. })
        ));
    }

    #[test]
    fn selection_report_round_trip() {
        let m = six();
        let mut result = fake_result(&m, Method::PhonemeBalance, vec![2, 0]);
        result.per_step[0].objective = Some(1.0);
        let report = SelectionReport::new(&result, &m, None).unwrap();
        let line = report.to_json_line();
        assert!(line.ends_with('\n') && line.matches('\n').count() == 1);
        assert!(line.contains("\"report_version\":1"));
        assert!(line.contains("\"method\":\"phoneme_balance\""));
        let parsed = SelectionReport::parse(&line).unwrap();
        assert_eq!(parsed, report);
        assert_eq!(parsed.indices_in(&m).unwrap(), [2, 0]);
        assert_eq!(parsed.into_result(), result);

        let mut wrong = report.clone();
        wrong.selected[0].id = "zzz".into();
        assert!(matches!(
            wrong.indices_in(&m),
            Err(ReportError::IdMismatch { index: 2, .. })
        ));
    }
}

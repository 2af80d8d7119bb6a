//! Entropy-balance baselines: phoneme balance and input (phoneme + speaker)
//! balance.

use std::collections::{BTreeMap, HashMap};

use rand_chacha::ChaCha8Rng;

use super::{
    argmax, run_budgeted, Method, SelectionBudget, SelectionError, SelectionResult, Strategy,
};
use crate::manifest::{Manifest, ManifestError};

/// Shannon entropy `−Σ pᵢ log pᵢ` of the distribution proportional to
/// `counts`. Zero counts contribute nothing; an all-zero table has entropy 0.
pub fn entropy<I>(counts: I, base: f64) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let counts: Vec<f64> = counts.into_iter().filter(|&c| c > 0.0).collect();
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let log = |p: f64| {
        if base == 2.0 {
            p.log2()
        } else {
            p.ln() / base.ln()
        }
    };
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c / total;
            -p * log(p)
        })
        .sum();
    h.max(0.0)
}

/// Phoneme-token and speaker occurrence counts of a subset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountTable {
    pub phoneme_counts: BTreeMap<String, u64>,
    pub speaker_counts: BTreeMap<String, u64>,
    pub total_phonemes: u64,
    pub total_utterances: u64,
}

impl CountTable {
    pub fn from_indices(manifest: &Manifest, indices: &[usize]) -> Result<Self, ManifestError> {
        let mut table = CountTable::default();
        for &i in indices {
            let record = manifest.get(i)?;
            for token in &record.phonemes {
                *table.phoneme_counts.entry(token.clone()).or_default() += 1;
            }
            *table
                .speaker_counts
                .entry(record.speaker.clone())
                .or_default() += 1;
            table.total_phonemes += record.phonemes.len() as u64;
            table.total_utterances += 1;
        }
        Ok(table)
    }

    pub fn phoneme_entropy(&self, base: f64) -> f64 {
        entropy(self.phoneme_counts.values().map(|&c| c as f64), base)
    }

    pub fn speaker_entropy(&self, base: f64) -> f64 {
        entropy(self.speaker_counts.values().map(|&c| c as f64), base)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceObjective {
    /// Phoneme entropy alone.
    Phoneme,
    /// Phoneme entropy plus speaker entropy.
    PhonemePlusSpeaker,
}

impl BalanceObjective {
    pub fn method(self) -> Method {
        match self {
            BalanceObjective::Phoneme => Method::PhonemeBalance,
            BalanceObjective::PhonemePlusSpeaker => Method::InputBalance,
        }
    }
}

/// Knobs for the entropy-balance objective. Defaults: equal weights, base-2
/// logarithms, speaker probabilities from utterance counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceOptions {
    pub phoneme_weight: f64,
    pub speaker_weight: f64,
    /// Weight speakers by duration instead of utterance count.
    pub speaker_by_duration: bool,
    pub base: f64,
}

impl Default for BalanceOptions {
    fn default() -> Self {
        BalanceOptions {
            phoneme_weight: 1.0,
            speaker_weight: 1.0,
            speaker_by_duration: false,
            base: 2.0,
        }
    }
}

fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Entropy in nats from a total and `Σ c ln c`.
fn entropy_nats(total: f64, sum_xlnx: f64) -> f64 {
    if total > 0.0 {
        (total.ln() - sum_xlnx / total).max(0.0)
    } else {
        0.0
    }
}

/// Running histogram with its `Σ c ln c`, so adding a few keys is scored
/// without touching the rest of the table.
struct Histogram {
    counts: Vec<f64>,
    total: f64,
    sum_xlnx: f64,
}

impl Histogram {
    fn new(bins: usize) -> Self {
        Histogram {
            counts: vec![0.0; bins],
            total: 0.0,
            sum_xlnx: 0.0,
        }
    }

    fn entropy_with(&self, additions: &[(usize, f64)]) -> f64 {
        let mut total = self.total;
        let mut sum = self.sum_xlnx;
        for &(bin, w) in additions {
            let c = self.counts[bin];
            sum += xlnx(c + w) - xlnx(c);
            total += w;
        }
        entropy_nats(total, sum)
    }

    fn add(&mut self, additions: &[(usize, f64)]) {
        for &(bin, w) in additions {
            self.counts[bin] += w;
            self.total += w;
        }
        // Recomputed from scratch so the running sum never drifts.
        self.sum_xlnx = self.counts.iter().map(|&c| xlnx(c)).sum();
    }
}

struct Balance {
    phonemes: Vec<Vec<(usize, f64)>>,
    speakers: Vec<[(usize, f64); 1]>,
    phoneme_hist: Histogram,
    speaker_hist: Histogram,
    phoneme_weight: f64,
    speaker_weight: f64,
    nats_to_base: f64,
}

impl Balance {
    fn new(manifest: &Manifest, objective: BalanceObjective, options: &BalanceOptions) -> Self {
        let phoneme_ids: HashMap<&str, usize> = manifest
            .phoneme_inventory()
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let speaker_ids: HashMap<&str, usize> = manifest
            .speaker_inventory()
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();

        let mut phonemes = Vec::with_capacity(manifest.len());
        let mut speakers = Vec::with_capacity(manifest.len());
        for record in manifest.records() {
            let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
            for token in &record.phonemes {
                *counts.entry(phoneme_ids[token.as_str()]).or_default() += 1.0;
            }
            phonemes.push(counts.into_iter().collect());
            let weight = if options.speaker_by_duration {
                record.duration_sec
            } else {
                1.0
            };
            speakers.push([(speaker_ids[record.speaker.as_str()], weight)]);
        }

        let speaker_weight = match objective {
            BalanceObjective::Phoneme => 0.0,
            BalanceObjective::PhonemePlusSpeaker => options.speaker_weight,
        };
        Balance {
            phonemes,
            speakers,
            phoneme_hist: Histogram::new(phoneme_ids.len()),
            speaker_hist: Histogram::new(speaker_ids.len()),
            phoneme_weight: options.phoneme_weight,
            speaker_weight,
            nats_to_base: 1.0 / options.base.ln(),
        }
    }

    fn score(&self, i: usize) -> f64 {
        let mut h = self.phoneme_weight * self.phoneme_hist.entropy_with(&self.phonemes[i]);
        if self.speaker_weight != 0.0 {
            h += self.speaker_weight * self.speaker_hist.entropy_with(&self.speakers[i]);
        }
        h * self.nats_to_base
    }

    fn current(&self) -> f64 {
        let mut h =
            self.phoneme_weight * entropy_nats(self.phoneme_hist.total, self.phoneme_hist.sum_xlnx);
        if self.speaker_weight != 0.0 {
            h += self.speaker_weight
                * entropy_nats(self.speaker_hist.total, self.speaker_hist.sum_xlnx);
        }
        h * self.nats_to_base
    }
}

impl Strategy for Balance {
    fn propose(&mut self, pool: &[usize], _rng: &mut ChaCha8Rng) -> Option<usize> {
        let this = &*self;
        argmax(pool, |i| this.score(i)).map(|(pos, _)| pos)
    }

    fn accept(&mut self, index: usize) -> Option<f64> {
        self.phoneme_hist.add(&self.phonemes[index]);
        self.speaker_hist.add(&self.speakers[index]);
        Some(self.current())
    }
}

/// Greedy entropy-balance selection with default [`BalanceOptions`].
///
/// Starts from the empty set and repeatedly adds the record that maximizes
/// the objective of the updated count table. The seed is recorded but no
/// step draws from it.
pub fn select_entropy_balance(
    manifest: &Manifest,
    objective: BalanceObjective,
    budget: SelectionBudget,
    seed: u64,
) -> Result<SelectionResult, SelectionError> {
    select_entropy_balance_with(
        manifest,
        objective,
        &BalanceOptions::default(),
        budget,
        seed,
    )
}

pub fn select_entropy_balance_with(
    manifest: &Manifest,
    objective: BalanceObjective,
    options: &BalanceOptions,
    budget: SelectionBudget,
    seed: u64,
) -> Result<SelectionResult, SelectionError> {
    if manifest.is_empty() {
        return Err(SelectionError::EmptyManifest);
    }
    let valid_weight = |w: f64| w.is_finite() && w >= 0.0;
    if !valid_weight(options.phoneme_weight) || !valid_weight(options.speaker_weight) {
        return Err(SelectionError::InvalidParameter(
            "entropy weights must be finite and non-negative".into(),
        ));
    }
    if !(options.base.is_finite() && options.base > 1.0) {
        return Err(SelectionError::InvalidParameter(format!(
            "logarithm base must exceed 1, got {}",
            options.base
        )));
    }
    let strategy = Balance::new(manifest, objective, options);
    Ok(run_budgeted(
        objective.method(),
        manifest,
        budget,
        seed,
        strategy,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::UtteranceRecord;

    fn manifest(items: &[(&str, &[&str])]) -> Manifest {
        Manifest::from_records(
            items
                .iter()
                .enumerate()
                .map(|(i, (spk, ph))| UtteranceRecord {
                    id: format!("u{i}"),
                    speaker: spk.to_string(),
                    duration_sec: 1.0,
                    phonemes: ph.iter().map(|s| s.to_string()).collect(),
                    text: None,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(entropy(vec![1.0; 8], 2.0), 3.0);
        assert_eq!(entropy([5.0], 2.0), 0.0);
        assert_eq!(entropy([5.0, 0.0, 0.0], 2.0), 0.0);
        assert_eq!(entropy([1.0, 1.0, 2.0], 2.0), 1.5);
        assert_eq!(entropy(Vec::<f64>::new(), 2.0), 0.0);
        assert_eq!(entropy([0.0, 0.0], 2.0), 0.0);
        assert!((entropy([1.0, 1.0], std::f64::consts::E) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn incremental_entropy_matches_direct() {
        let mut hist = Histogram::new(4);
        hist.add(&[(0, 3.0), (2, 1.0)]);
        let add = [(1, 2.0), (2, 1.0)];
        let direct = entropy([3.0, 2.0, 2.0, 0.0], std::f64::consts::E);
        assert!((hist.entropy_with(&add) - direct).abs() < 1e-12);
    }

    #[test]
    fn count_table_totals() {
        let m = manifest(&[("a", &["x", "y", "x"]), ("b", &["y"]), ("a", &[])]);
        let t = CountTable::from_indices(&m, &[0, 1, 2]).unwrap();
        assert_eq!(t.total_phonemes, t.phoneme_counts.values().sum::<u64>());
        assert_eq!(t.total_utterances, t.speaker_counts.values().sum::<u64>());
        assert_eq!(t.phoneme_counts["x"], 2);
        assert_eq!(t.speaker_counts["a"], 2);
        assert!(CountTable::from_indices(&m, &[3]).is_err());
    }

    #[test]
    fn identical_sequences_keep_manifest_order() {
        let m = manifest(&[
            ("s", &["a", "b"]),
            ("s", &["a", "b"]),
            ("s", &["a", "b"]),
            ("s", &["a", "b"]),
        ]);
        let r = select_entropy_balance(
            &m,
            BalanceObjective::Phoneme,
            SelectionBudget::seconds(3.0).unwrap(),
            0,
        )
        .unwrap();
        assert_eq!(r.indices, [0, 1, 2]);
    }

    #[test]
    fn two_symbol_pick() {
        let m = manifest(&[("s", &["a"]), ("s", &["a"]), ("s", &["b"])]);
        let r = select_entropy_balance(
            &m,
            BalanceObjective::Phoneme,
            SelectionBudget::seconds(2.0).unwrap(),
            0,
        )
        .unwrap();
        assert_eq!(r.indices, [0, 2]);
        assert_eq!(r.final_objective(), Some(1.0));
    }

    #[test]
    fn speaker_term_breaks_phoneme_ties() {
        let m = manifest(&[("s1", &["a"]), ("s1", &["a"]), ("s2", &["a"])]);
        let budget = SelectionBudget::seconds(2.0).unwrap();
        let phon = select_entropy_balance(&m, BalanceObjective::Phoneme, budget, 0).unwrap();
        let input =
            select_entropy_balance(&m, BalanceObjective::PhonemePlusSpeaker, budget, 0).unwrap();
        assert_eq!(phon.indices, [0, 1]);
        assert_eq!(input.indices, [0, 2]);
        assert_eq!(input.method, Method::InputBalance);
        assert_eq!(input.final_objective(), Some(1.0));
    }

    #[test]
    fn rejects_bad_options() {
        let m = manifest(&[("s", &["a"])]);
        let b = SelectionBudget::seconds(1.0).unwrap();
        let bad = BalanceOptions {
            base: 1.0,
            ..Default::default()
        };
        assert!(select_entropy_balance_with(&m, BalanceObjective::Phoneme, &bad, b, 0).is_err());
        let bad = BalanceOptions {
            speaker_weight: -1.0,
            ..Default::default()
        };
        assert!(
            select_entropy_balance_with(&m, BalanceObjective::PhonemePlusSpeaker, &bad, b, 0)
                .is_err()
        );
    }
}

//! Fixtures and brute-force oracles shared by the integration suites. Nothing
//! here calls the library's scoring code.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tts_coreset::{FeatureMatrix, Manifest, OverflowPolicy, UtteranceRecord};

pub const ORACLE_TIE_TOLERANCE: f64 = 1e-9;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn record(i: usize, speaker: &str, duration: f64, phonemes: &[String]) -> UtteranceRecord {
    UtteranceRecord {
        id: format!("utt{i:05}"),
        speaker: speaker.to_string(),
        duration_sec: duration,
        phonemes: phonemes.to_vec(),
        text: None,
    }
}

pub fn manifest_from_durations(durations: &[f64]) -> Manifest {
    Manifest::from_records(
        durations
            .iter()
            .enumerate()
            .map(|(i, &d)| record(i, "spk", d, &[]))
            .collect(),
    )
    .unwrap()
}

pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let u = Uniform::new(-1.0, 1.0).unwrap();
    (0..n)
        .map(|_| (0..dim).map(|_| u.sample(rng)).collect())
        .collect()
}

pub fn matrix_from(rows: &[Vec<f64>]) -> FeatureMatrix {
    let rows32: Vec<Vec<f32>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| v as f32).collect())
        .collect();
    FeatureMatrix::from_rows(&rows32).unwrap()
}

pub fn row64(m: &FeatureMatrix, i: usize) -> Vec<f64> {
    m.row(i).iter().map(|&v| f64::from(v)).collect()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += (a[k] - b[k]) * (a[k] - b[k]);
    }
    s
}

/// Σ_{x,y∈S} ‖x − y‖² by double loop.
pub fn brute_diversity(rows: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for x in rows {
        for y in rows {
            total += sq_dist(x, y);
        }
    }
    total
}

pub fn brute_gain(selected: &[Vec<f64>], x: &[f64]) -> f64 {
    selected.iter().map(|y| sq_dist(x, y)).sum()
}

pub fn brute_min_distance(selected: &[Vec<f64>], x: &[f64]) -> f64 {
    selected
        .iter()
        .map(|y| sq_dist(x, y))
        .fold(f64::INFINITY, f64::min)
}

/// −Σ p log₂ p over positive counts.
pub fn brute_entropy_bits(counts: &BTreeMap<String, f64>) -> f64 {
    let total: f64 = counts.values().sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut h = 0.0;
    for &c in counts.values() {
        if c > 0.0 {
            let p = c / total;
            h -= p * p.log2();
        }
    }
    h
}

/// Phoneme entropy (+ speaker entropy when `with_speaker`) of `subset`,
/// recounted from scratch.
pub fn brute_balance_objective(manifest: &Manifest, subset: &[usize], with_speaker: bool) -> f64 {
    let mut phon = BTreeMap::new();
    let mut spk = BTreeMap::new();
    for &i in subset {
        let r = &manifest.records()[i];
        for t in &r.phonemes {
            *phon.entry(t.clone()).or_insert(0.0) += 1.0;
        }
        *spk.entry(r.speaker.clone()).or_insert(0.0) += 1.0;
    }
    let mut h = brute_entropy_bits(&phon);
    if with_speaker {
        h += brute_entropy_bits(&spk);
    }
    h
}

/// Lowest candidate whose score is within `ORACLE_TIE_TOLERANCE` (relative)
/// of the best score.
pub fn oracle_argmax(candidates: &[usize], scores: &[f64]) -> usize {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = best - ORACLE_TIE_TOLERANCE * best.abs().max(1e-12);
    let pos = scores.iter().position(|&s| s >= threshold).unwrap();
    candidates[pos]
}

/// Independent replay of the budgeted greedy loop. `first` fixes the initial
/// pick (the random draw); `None` means the first pick is an argmax too.
/// `score(selected, candidate)` must be a naive recomputation.
pub fn oracle_greedy<F>(
    durations: &[f64],
    t_max: f64,
    policy: OverflowPolicy,
    first: Option<usize>,
    score: F,
) -> Vec<usize>
where
    F: Fn(&[usize], usize) -> f64,
{
    let n = durations.len();
    let mut in_play = vec![true; n];
    let mut selected: Vec<usize> = Vec::new();
    let mut total = 0.0;
    let mut pending = first;
    loop {
        let candidate = match pending.take() {
            Some(c) => c,
            None => {
                let candidates: Vec<usize> = (0..n).filter(|&i| in_play[i]).collect();
                if candidates.is_empty() {
                    break;
                }
                let scores: Vec<f64> = candidates.iter().map(|&c| score(&selected, c)).collect();
                oracle_argmax(&candidates, &scores)
            }
        };
        in_play[candidate] = false;
        if total + durations[candidate] <= t_max {
            total += durations[candidate];
            selected.push(candidate);
        } else if policy == OverflowPolicy::StopOnFirstOverflow {
            break;
        }
    }
    selected
}

/// Synthetic speech-like corpus: phonemes drawn from a skewed inventory,
/// speakers assigned round-robin with random skew, durations roughly
/// proportional to length.
pub struct SyntheticCorpus {
    pub manifest: Manifest,
    /// Cluster id per record, for feature generation.
    pub domain: Vec<usize>,
}

pub fn synthetic_corpus(
    rng: &mut ChaCha8Rng,
    n: usize,
    speakers: usize,
    inventory: usize,
) -> SyntheticCorpus {
    let tokens: Vec<String> = (0..inventory).map(|k| format!("p{k:02}")).collect();
    // Zipf-like weights.
    let weights: Vec<f64> = (0..inventory).map(|k| 1.0 / (k as f64 + 1.0)).collect();
    let wsum: f64 = weights.iter().sum();
    let mut records = Vec::with_capacity(n);
    let mut domain = Vec::with_capacity(n);
    for i in 0..n {
        let len = rng.random_range(15..35);
        let mut phonemes = Vec::with_capacity(len);
        for _ in 0..len {
            let mut u = rng.random::<f64>() * wsum;
            let mut k = 0;
            while k + 1 < inventory && u >= weights[k] {
                u -= weights[k];
                k += 1;
            }
            phonemes.push(tokens[k].clone());
        }
        let speaker = format!("spk{:02}", rng.random_range(0..speakers));
        let duration = 1.0 + 0.08 * len as f64 + rng.random_range(0.0..0.5);
        records.push(record(i, &speaker, duration, &phonemes));
        domain.push(rng.random_range(0..8));
    }
    SyntheticCorpus {
        manifest: Manifest::from_records(records).unwrap(),
        domain,
    }
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / n).collect()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller.
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Weight of the direction shared by every embedding of one aspect. Encoder
/// outputs are anisotropic; at 1.0 two unrelated centers have cosine ≈ 0.5.
pub const SHARED_DIRECTION_WEIGHT: f64 = 1.0;

/// Gaussian vector plus the aspect's shared direction.
fn anisotropic(rng: &mut ChaCha8Rng, shared: &[f64]) -> Vec<f64> {
    shared
        .iter()
        .map(|&s| SHARED_DIRECTION_WEIGHT * s + gaussian(rng))
        .collect()
}

/// Per-aspect unit-norm features (linguistic, speaker, acoustic) with
/// cluster structure: linguistic and acoustic rows scatter around a
/// per-domain center, speaker rows are identical within a speaker.
pub fn synthetic_parts(
    rng: &mut ChaCha8Rng,
    corpus: &SyntheticCorpus,
    dims: [usize; 3],
) -> [FeatureMatrix; 3] {
    let [d_ling, d_spk, d_ac] = dims;
    let shared = |rng: &mut ChaCha8Rng, dim: usize| -> Vec<f64> {
        let u = unit((0..dim).map(|_| gaussian(rng)).collect());
        u.into_iter().map(|v| v * (dim as f64).sqrt()).collect()
    };
    let centers = |rng: &mut ChaCha8Rng, dim: usize| -> Vec<Vec<f64>> {
        let s = shared(rng, dim);
        (0..8).map(|_| anisotropic(rng, &s)).collect()
    };
    let ling_centers = centers(rng, d_ling);
    let ac_centers = centers(rng, d_ac);
    let spk_shared = shared(rng, d_spk);
    let spk_vectors: BTreeMap<&str, Vec<f64>> = corpus
        .manifest
        .speaker_inventory()
        .iter()
        .map(|s| (s.as_str(), unit(anisotropic(rng, &spk_shared))))
        .collect();

    let mut ling = Vec::new();
    let mut spk = Vec::new();
    let mut ac = Vec::new();
    for (i, r) in corpus.manifest.records().iter().enumerate() {
        let c = corpus.domain[i];
        ling.push(unit(
            ling_centers[c]
                .iter()
                .map(|&x| x + 0.3 * gaussian(rng))
                .collect(),
        ));
        ac.push(unit(
            ac_centers[c]
                .iter()
                .map(|&x| x + 0.5 * gaussian(rng))
                .collect(),
        ));
        spk.push(spk_vectors[r.speaker.as_str()].clone());
    }
    [matrix_from(&ling), matrix_from(&spk), matrix_from(&ac)]
}

//! Set-level correctness, diversity, efficiency, and calibration metrics.
//!
//! The unit of evaluation is a [`SetRecord`]: K candidate answers with their
//! correctness bits, optional aligned confidences, and the token total of the
//! generations that produced them. A record is tagged with its
//! [`RecordSource`]: either one multi-answer generation or K independent
//! single-answer samples. Pooled and set-level calibration numbers depend on
//! how the set was constructed, so [`compute_report`] refuses mixed-source
//! input; cross-source comparisons are only meaningful for top-1 metrics.
//!
//! Binning convention for ECE and reliability curves: m equal-width bins with
//! edges at i/m, left-closed, right-open, last bin closed, so q = 1.0 lands
//! in the top bin. Bin membership is decided against the edges themselves
//! (not by `floor(q*m)`), which is what the brute-force oracle in the tests
//! checks against.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tagparse::{canonicalize, NRegime};
use crate::verify::{unique_count, CorrectnessVector};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("metric needs at least one record/point")]
    EmptyInput,
    #[error("metric needs at least {needed} texts, got {got}")]
    TooFewTexts { needed: usize, got: usize },
    #[error("bin count must be at least 1")]
    ZeroBins,
    #[error("n-gram size must be at least 1")]
    ZeroNgram,
    #[error("record '{0}' lacks confidences")]
    MissingConfidences(String),
    #[error("record '{id}' has misaligned lengths (answers {answers}, bits {bits}, confidences {confidences:?})")]
    LengthMismatch {
        id: String,
        answers: usize,
        bits: usize,
        confidences: Option<usize>,
    },
    #[error("single-source records have zero mean token total")]
    ZeroDenominator,
    #[error("records mix sources; pooled and set-level metrics are not comparable across single and multi construction")]
    MixedSources,
}

/// How an answer set was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordSource {
    /// One generation carrying all K answers.
    MultiOneGeneration,
    /// K independent single-answer samples treated as a set.
    SingleKSamples,
}

impl RecordSource {
    pub fn label(&self) -> &'static str {
        match self {
            RecordSource::MultiOneGeneration => "multi_one_generation",
            RecordSource::SingleKSamples => "single_k_samples",
        }
    }
}

/// One evaluation set: answers, optional confidences, correctness bits, and
/// the token cost of producing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetRecord {
    pub id: String,
    pub answers: Vec<String>,
    pub confidences: Option<Vec<f64>>,
    pub correctness: CorrectnessVector,
    pub token_total: u64,
    pub source: RecordSource,
}

impl SetRecord {
    pub fn new(
        id: impl Into<String>,
        answers: Vec<String>,
        confidences: Option<Vec<f64>>,
        correctness: CorrectnessVector,
        token_total: u64,
        source: RecordSource,
    ) -> Result<Self, MetricsError> {
        let id = id.into();
        let aligned = answers.len() == correctness.len()
            && confidences
                .as_ref()
                .is_none_or(|c| c.len() == answers.len());
        if !aligned {
            return Err(MetricsError::LengthMismatch {
                id,
                answers: answers.len(),
                bits: correctness.len(),
                confidences: confidences.as_ref().map(Vec::len),
            });
        }
        Ok(Self {
            id,
            answers,
            confidences,
            correctness,
            token_total,
            source,
        })
    }

    pub fn k(&self) -> usize {
        self.answers.len()
    }
}

/// How the pass@1 answer is selected from a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    /// The first answer in document order (multi-answer sets rank their head
    /// answer highest).
    First,
    /// Uniformly at random, seeded per record (independent single samples
    /// have no ranking).
    UniformRandom,
}

/// One reliability-curve bin. `mean_conf`/`mean_acc` are absent for empty
/// bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_conf: Option<f64>,
    pub mean_acc: Option<f64>,
}

/// Every aggregate for one (method, source) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Mean over records of (correct in set) / K.
    pub coverage_mean: f64,
    /// Mean over records of the raw number correct in the set. Tables in the
    /// wild report either this or the K-normalized form, so both are emitted.
    pub correct_count: f64,
    pub pass1: f64,
    pub pass_at_k: f64,
    pub uniqueness_mean: f64,
    pub avg_token_total: f64,
    pub brier_top1: Option<f64>,
    pub brier_pooled: Option<f64>,
    pub ece_top1: Option<f64>,
    pub ece_pooled: Option<f64>,
    pub set_ece: Option<f64>,
    pub n_records: usize,
    /// Records that entered the metrics as all-wrong because their generation
    /// failed to parse.
    pub n_invalid: usize,
}

// ---------------------------------------------------------------------------
// Correctness and efficiency
// ---------------------------------------------------------------------------

/// (mean per-record fraction correct, mean per-record count correct).
pub fn coverage(records: &[SetRecord]) -> Result<(f64, f64), MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut frac_sum = 0.0;
    let mut count_sum = 0.0;
    for r in records {
        let correct = r.correctness.count_correct() as f64;
        let k = r.k().max(1) as f64;
        frac_sum += correct / k;
        count_sum += correct;
    }
    let n = records.len() as f64;
    Ok((frac_sum / n, count_sum / n))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Deterministic per-record generator stream, keyed by (seed, record id).
fn record_rng(seed: u64, id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15) ^ fnv1a64(id.as_bytes()))
}

/// The index each record's pass@1 answer is selected from, under `rule`.
pub fn selection_indices(records: &[SetRecord], rule: SelectionRule, seed: u64) -> Vec<usize> {
    records
        .iter()
        .map(|r| match rule {
            SelectionRule::First => 0,
            SelectionRule::UniformRandom => {
                if r.k() <= 1 {
                    0
                } else {
                    record_rng(seed, &r.id).random_range(0..r.k())
                }
            }
        })
        .collect()
}

/// Fraction of records whose selected answer is correct.
pub fn pass1(records: &[SetRecord], rule: SelectionRule, seed: u64) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let indices = selection_indices(records, rule, seed);
    let hits = records
        .iter()
        .zip(&indices)
        .filter(|(r, i)| r.correctness.bits.get(**i).copied().unwrap_or(false))
        .count();
    Ok(hits as f64 / records.len() as f64)
}

/// Fraction of records with at least one correct answer in the set.
pub fn pass_at_k(records: &[SetRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let hits = records
        .iter()
        .filter(|r| r.correctness.any_correct())
        .count();
    Ok(hits as f64 / records.len() as f64)
}

/// Ratio of mean token totals: multi-answer sets over single-sample sets
/// (whose totals already sum their K independent generations).
pub fn token_efficiency(
    multi_records: &[SetRecord],
    single_records: &[SetRecord],
) -> Result<f64, MetricsError> {
    if multi_records.is_empty() || single_records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mean =
        |rs: &[SetRecord]| rs.iter().map(|r| r.token_total as f64).sum::<f64>() / rs.len() as f64;
    let denom = mean(single_records);
    if denom == 0.0 {
        return Err(MetricsError::ZeroDenominator);
    }
    Ok(mean(multi_records) / denom)
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

/// Mean squared error between confidence and correctness.
pub fn brier(points: &[(f64, bool)]) -> Result<f64, MetricsError> {
    if points.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let sum: f64 = points
        .iter()
        .map(|(q, b)| {
            let y = if *b { 1.0 } else { 0.0 };
            (q - y) * (q - y)
        })
        .sum();
    Ok(sum / points.len() as f64)
}

/// Bin index under the documented edge convention: largest i with q >= i/m,
/// capped at m - 1.
fn bin_index(q: f64, bins: usize) -> usize {
    let m = bins as f64;
    let mut idx = ((q * m) as usize).min(bins - 1);
    while idx + 1 < bins && q >= (idx + 1) as f64 / m {
        idx += 1;
    }
    while idx > 0 && q < idx as f64 / m {
        idx -= 1;
    }
    idx
}

/// Expected calibration error over `bins` equal-width bins.
pub fn ece(points: &[(f64, bool)], bins: usize) -> Result<f64, MetricsError> {
    let curve = reliability_curve(points, bins)?;
    let total = points.len() as f64;
    Ok(curve
        .iter()
        .filter(|b| b.count > 0)
        .map(|b| {
            let gap = (b.mean_acc.unwrap() - b.mean_conf.unwrap()).abs();
            b.count as f64 / total * gap
        })
        .sum())
}

/// The per-bin decomposition underlying [`ece`]. All `bins` bins are
/// returned, empty ones included, so the curve is a complete partition.
pub fn reliability_curve(
    points: &[(f64, bool)],
    bins: usize,
) -> Result<Vec<CalibrationBin>, MetricsError> {
    if bins == 0 {
        return Err(MetricsError::ZeroBins);
    }
    if points.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut counts = vec![0usize; bins];
    let mut conf_sums = vec![0.0f64; bins];
    let mut acc_sums = vec![0.0f64; bins];
    for (q, b) in points {
        let idx = bin_index(*q, bins);
        counts[idx] += 1;
        conf_sums[idx] += q;
        acc_sums[idx] += if *b { 1.0 } else { 0.0 };
    }
    Ok((0..bins)
        .map(|i| {
            let count = counts[i];
            CalibrationBin {
                lo: i as f64 / bins as f64,
                hi: (i + 1) as f64 / bins as f64,
                count,
                mean_conf: (count > 0).then(|| conf_sums[i] / count as f64),
                mean_acc: (count > 0).then(|| acc_sums[i] / count as f64),
            }
        })
        .collect())
}

/// Set-level confidence for one record.
///
/// Single-gold regime: the confidences form a distribution over candidates,
/// so the set confidence is their sum (clamped at 1; lenient dumps can break
/// the constraint). Multi-gold regime: correctness events are treated as
/// independent, so the set confidence is `1 - prod(1 - q_i)`.
pub fn set_confidence(record: &SetRecord, n_regime: NRegime) -> Result<f64, MetricsError> {
    let confidences = record
        .confidences
        .as_ref()
        .ok_or_else(|| MetricsError::MissingConfidences(record.id.clone()))?;
    Ok(match n_regime {
        NRegime::SingleGold => confidences.iter().sum::<f64>().min(1.0),
        NRegime::MultiGold => 1.0 - confidences.iter().map(|q| 1.0 - q).product::<f64>(),
    })
}

/// ECE over (set confidence, any-correct) points.
pub fn set_ece(records: &[SetRecord], n_regime: NRegime, bins: usize) -> Result<f64, MetricsError> {
    let points = records
        .iter()
        .map(|r| Ok((set_confidence(r, n_regime)?, r.correctness.any_correct())))
        .collect::<Result<Vec<_>, MetricsError>>()?;
    ece(&points, bins)
}

// ---------------------------------------------------------------------------
// Diversity
// ---------------------------------------------------------------------------

/// Mean pairwise Jaccard similarity of the texts' n-gram supports
/// (whitespace tokens, case-folded).
pub fn ngram_overlap<S: AsRef<str>>(texts: &[S], n: usize) -> Result<f64, MetricsError> {
    if n == 0 {
        return Err(MetricsError::ZeroNgram);
    }
    if texts.len() < 2 {
        return Err(MetricsError::TooFewTexts {
            needed: 2,
            got: texts.len(),
        });
    }
    let supports: Vec<std::collections::BTreeSet<Vec<String>>> = texts
        .iter()
        .map(|t| {
            let tokens: Vec<String> = t
                .as_ref()
                .split_whitespace()
                .map(|w| w.to_lowercase())
                .collect();
            tokens.windows(n).map(|w| w.to_vec()).collect()
        })
        .collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..supports.len() {
        for j in i + 1..supports.len() {
            let inter = supports[i].intersection(&supports[j]).count();
            let union = supports[i].union(&supports[j]).count();
            // Two texts with no n-grams at all have identical (empty) supports.
            total += if union == 0 {
                1.0
            } else {
                inter as f64 / union as f64
            };
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

// ---------------------------------------------------------------------------
// Report assembly
// ---------------------------------------------------------------------------

/// Build the full report for one group of records sharing a source.
///
/// The pass@1 rule follows the source: first answer for multi-answer sets,
/// seeded uniform choice for independent-sample sets. Top-1 calibration
/// metrics use the same selected index as pass@1. Calibration fields are
/// emitted only when every record carries confidences.
pub fn compute_report(
    records: &[SetRecord],
    n_regime: NRegime,
    bins: usize,
    seed: u64,
    n_invalid: usize,
) -> Result<MetricsReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if bins == 0 {
        return Err(MetricsError::ZeroBins);
    }
    let source = records[0].source;
    if records.iter().any(|r| r.source != source) {
        return Err(MetricsError::MixedSources);
    }
    let rule = match source {
        RecordSource::MultiOneGeneration => SelectionRule::First,
        RecordSource::SingleKSamples => SelectionRule::UniformRandom,
    };

    let (coverage_mean, correct_count) = coverage(records)?;
    let indices = selection_indices(records, rule, seed);
    let pass1 = {
        let hits = records
            .iter()
            .zip(&indices)
            .filter(|(r, i)| r.correctness.bits.get(**i).copied().unwrap_or(false))
            .count();
        hits as f64 / records.len() as f64
    };
    let pass_at_k = pass_at_k(records)?;
    let uniqueness_mean = records
        .iter()
        .map(|r| unique_count(&r.answers, canonicalize) as f64)
        .sum::<f64>()
        / records.len() as f64;
    let avg_token_total =
        records.iter().map(|r| r.token_total as f64).sum::<f64>() / records.len() as f64;

    let all_calibrated = records.iter().all(|r| r.confidences.is_some());
    let (brier_top1, brier_pooled, ece_top1, ece_pooled, set_ece_value) = if all_calibrated {
        let top1_points: Vec<(f64, bool)> = records
            .iter()
            .zip(&indices)
            .map(|(r, i)| {
                let q = r
                    .confidences
                    .as_ref()
                    .unwrap()
                    .get(*i)
                    .copied()
                    .unwrap_or(0.0);
                (q, r.correctness.bits.get(*i).copied().unwrap_or(false))
            })
            .collect();
        let pooled_points: Vec<(f64, bool)> = records
            .iter()
            .flat_map(|r| {
                r.confidences
                    .as_ref()
                    .unwrap()
                    .iter()
                    .copied()
                    .zip(r.correctness.bits.iter().copied())
            })
            .collect();
        (
            Some(brier(&top1_points)?),
            Some(brier(&pooled_points)?),
            Some(ece(&top1_points, bins)?),
            Some(ece(&pooled_points, bins)?),
            Some(set_ece(records, n_regime, bins)?),
        )
    } else {
        (None, None, None, None, None)
    };

    Ok(MetricsReport {
        coverage_mean,
        correct_count,
        pass1,
        pass_at_k,
        uniqueness_mean,
        avg_token_total,
        brier_top1,
        brier_pooled,
        ece_top1,
        ece_pooled,
        set_ece: set_ece_value,
        n_records: records.len(),
        n_invalid,
    })
}

/// The three reliability curves for a calibrated group: top-1, pooled, and
/// set-level points.
pub fn report_curves(
    records: &[SetRecord],
    n_regime: NRegime,
    bins: usize,
    seed: u64,
) -> Result<BTreeMap<&'static str, Vec<CalibrationBin>>, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let source = records[0].source;
    let rule = match source {
        RecordSource::MultiOneGeneration => SelectionRule::First,
        RecordSource::SingleKSamples => SelectionRule::UniformRandom,
    };
    let indices = selection_indices(records, rule, seed);
    let mut top1 = Vec::new();
    let mut pooled = Vec::new();
    let mut set_points = Vec::new();
    for (r, i) in records.iter().zip(&indices) {
        let confidences = r
            .confidences
            .as_ref()
            .ok_or_else(|| MetricsError::MissingConfidences(r.id.clone()))?;
        top1.push((
            confidences.get(*i).copied().unwrap_or(0.0),
            r.correctness.bits.get(*i).copied().unwrap_or(false),
        ));
        pooled.extend(
            confidences
                .iter()
                .copied()
                .zip(r.correctness.bits.iter().copied()),
        );
        set_points.push((set_confidence(r, n_regime)?, r.correctness.any_correct()));
    }
    let mut curves = BTreeMap::new();
    curves.insert("top1", reliability_curve(&top1, bins)?);
    curves.insert("pooled", reliability_curve(&pooled, bins)?);
    curves.insert("set", reliability_curve(&set_points, bins)?);
    Ok(curves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::{verify_set, GoldSpec};
    use proptest::prelude::*;

    fn record(id: &str, bits: &[bool], confs: Option<&[f64]>, source: RecordSource) -> SetRecord {
        let answers: Vec<String> = (0..bits.len()).map(|i| format!("{id}-{i}")).collect();
        SetRecord::new(
            id,
            answers,
            confs.map(|c| c.to_vec()),
            CorrectnessVector {
                bits: bits.to_vec(),
            },
            0,
            source,
        )
        .unwrap()
    }

    #[test]
    fn coverage_examples() {
        let r = record(
            "r",
            &[true, true, false],
            None,
            RecordSource::MultiOneGeneration,
        );
        let (mean, count) = coverage(std::slice::from_ref(&r)).unwrap();
        assert!((mean - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(count, 2.0);

        let all = record(
            "a",
            &[true, true, true],
            None,
            RecordSource::MultiOneGeneration,
        );
        assert_eq!(coverage(&[all]).unwrap(), (1.0, 3.0));

        // A K = 2 run with fraction coverage 0.78 implies 1.56 correct per set.
        let records: Vec<SetRecord> = (0..100)
            .map(|i| {
                record(
                    &format!("r{i}"),
                    &[true, i % 100 < 56],
                    None,
                    RecordSource::MultiOneGeneration,
                )
            })
            .collect();
        let (mean, count) = coverage(&records).unwrap();
        assert!((mean - 0.78).abs() < 1e-12);
        assert!((count - 2.0 * mean).abs() < 1e-12);
        assert!((count - 1.56).abs() < 1e-12);

        assert_eq!(coverage(&[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn pass1_first_rule() {
        let miss = record(
            "m",
            &[false, true, true],
            None,
            RecordSource::MultiOneGeneration,
        );
        let hit = record(
            "h",
            &[true, true, true],
            None,
            RecordSource::MultiOneGeneration,
        );
        assert_eq!(
            pass1(std::slice::from_ref(&miss), SelectionRule::First, 0).unwrap(),
            0.0
        );
        assert_eq!(
            pass1(std::slice::from_ref(&hit), SelectionRule::First, 0).unwrap(),
            1.0
        );
        assert_eq!(pass1(&[miss, hit], SelectionRule::First, 0).unwrap(), 0.5);
    }

    #[test]
    fn pass1_uniform_random_matches_enumerated_draws_and_expectation() {
        let records: Vec<SetRecord> = (0..1000)
            .map(|i| {
                // Exactly one of three answers is correct, in a rotating slot.
                let mut bits = [false, false, false];
                bits[i % 3] = true;
                record(
                    &format!("rec{i}"),
                    &bits,
                    None,
                    RecordSource::SingleKSamples,
                )
            })
            .collect();
        let seed = 17;
        let value = pass1(&records, SelectionRule::UniformRandom, seed).unwrap();

        // Independent oracle: re-derive every draw from the keyed streams.
        let mut hits = 0usize;
        for r in &records {
            let idx = record_rng(seed, &r.id).random_range(0..r.k());
            if r.correctness.bits[idx] {
                hits += 1;
            }
        }
        assert_eq!(value, hits as f64 / 1000.0);
        // Analytic expectation is 1/3; a fair seed should land near it.
        assert!((value - 1.0 / 3.0).abs() < 0.05, "value = {value}");
    }

    #[test]
    fn pass_at_k_examples() {
        let none = record("n", &[false, false], None, RecordSource::MultiOneGeneration);
        let one = record("o", &[false, true], None, RecordSource::MultiOneGeneration);
        assert_eq!(pass_at_k(std::slice::from_ref(&none)).unwrap(), 0.0);
        assert_eq!(pass_at_k(std::slice::from_ref(&one)).unwrap(), 1.0);
        assert_eq!(pass_at_k(&[none, one]).unwrap(), 0.5);
    }

    #[test]
    fn brier_examples() {
        let points = [(0.40, true), (0.30, false), (0.30, false)];
        assert!((brier(&points).unwrap() - 0.18).abs() < 1e-12);
        assert_eq!(brier(&[(1.0, true), (0.0, false)]).unwrap(), 0.0);
        assert_eq!(brier(&[(0.5, true)]).unwrap(), 0.25);
        assert_eq!(brier(&[(0.5, false)]).unwrap(), 0.25);
        assert_eq!(brier(&[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn ece_single_bin_case() {
        let points: Vec<(f64, bool)> = (0..40).map(|_| (0.95, true)).collect();
        assert!((ece(&points, 10).unwrap() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn ece_two_bin_weighted_mean() {
        // Bin [0.3, 0.4): 20 points at q = 0.35, 9 correct => acc 0.45, gap 0.1.
        // Bin [0.5, 0.6): 20 points at q = 0.55, 17 correct => acc 0.85, gap 0.3.
        let mut points = Vec::new();
        for i in 0..20 {
            points.push((0.35, i < 9));
            points.push((0.55, i < 17));
        }
        assert!((ece(&points, 10).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn ece_zero_when_bins_are_calibrated() {
        // Each bin's mean confidence equals its accuracy exactly.
        let mut points: Vec<(f64, bool)> = (0..10).map(|i| (0.2, i < 2)).collect();
        points.extend((0..10).map(|i| (0.8, i < 8)));
        assert!((ece(&points, 10).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn bin_edges_left_closed_right_open_last_closed() {
        assert_eq!(bin_index(0.0, 10), 0);
        assert_eq!(bin_index(0.3, 10), 3); // exactly on an edge goes right
        assert_eq!(bin_index(0.999, 10), 9);
        assert_eq!(bin_index(1.0, 10), 9); // top bin is closed
        assert_eq!(bin_index(0.5, 1), 0);
    }

    /// Brute-force oracle: assign each point by scanning the edges linearly,
    /// then aggregate with naive means.
    fn ece_oracle(points: &[(f64, bool)], bins: usize) -> f64 {
        let mut assigned: Vec<Vec<(f64, bool)>> = vec![Vec::new(); bins];
        for p in points {
            let mut idx = bins - 1;
            for i in 0..bins {
                let lo = i as f64 / bins as f64;
                let hi = (i + 1) as f64 / bins as f64;
                if p.0 >= lo && (p.0 < hi || i == bins - 1) {
                    idx = i;
                    break;
                }
            }
            assigned[idx].push(*p);
        }
        let total = points.len() as f64;
        assigned
            .iter()
            .filter(|b| !b.is_empty())
            .map(|b| {
                let n = b.len() as f64;
                let conf = b.iter().map(|(q, _)| q).sum::<f64>() / n;
                let acc = b.iter().filter(|(_, y)| *y).count() as f64 / n;
                n / total * (acc - conf).abs()
            })
            .sum()
    }

    #[test]
    fn ece_matches_brute_force_oracle_on_randomized_points() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let points: Vec<(f64, bool)> = (0..1000)
            .map(|i| {
                // Mix smooth draws with exact bin-edge values.
                let q = if i % 7 == 0 {
                    (i % 11) as f64 / 10.0
                } else {
                    rng.random::<f64>()
                };
                (q, rng.random::<f64>() < q)
            })
            .collect();
        for bins in [1, 3, 10, 17] {
            let fast = ece(&points, bins).unwrap();
            let slow = ece_oracle(&points, bins);
            assert!((fast - slow).abs() < 1e-12, "bins={bins}: {fast} vs {slow}");
        }
    }

    #[test]
    fn set_confidence_examples() {
        let r = record(
            "r",
            &[true, false, false],
            Some(&[0.40, 0.30, 0.30]),
            RecordSource::MultiOneGeneration,
        );
        let q = set_confidence(&r, NRegime::SingleGold).unwrap();
        assert!((q - 1.0).abs() < 1e-12);

        let r = record(
            "r2",
            &[true, false],
            Some(&[0.5, 0.5]),
            RecordSource::MultiOneGeneration,
        );
        assert!((set_confidence(&r, NRegime::MultiGold).unwrap() - 0.75).abs() < 1e-12);

        let r = record(
            "r3",
            &[false],
            Some(&[0.0]),
            RecordSource::MultiOneGeneration,
        );
        assert_eq!(set_confidence(&r, NRegime::SingleGold).unwrap(), 0.0);
        assert_eq!(set_confidence(&r, NRegime::MultiGold).unwrap(), 0.0);

        let r = record("r4", &[false], None, RecordSource::MultiOneGeneration);
        assert!(set_confidence(&r, NRegime::SingleGold).is_err());

        // Clamped at 1 for lenient dumps that break the sum constraint.
        let over = record(
            "r5",
            &[true, false],
            Some(&[0.9, 0.8]),
            RecordSource::MultiOneGeneration,
        );
        assert_eq!(set_confidence(&over, NRegime::SingleGold).unwrap(), 1.0);
    }

    #[test]
    fn set_confidence_multi_gold_matches_independent_enumeration() {
        // For every confidence vector on a 0.25-step grid (K <= 4), the
        // noisy-or form equals the enumerated probability of >= 1 success.
        for k in 1..=4usize {
            let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
            let mut stack = vec![Vec::new()];
            while let Some(prefix) = stack.pop() {
                if prefix.len() == k {
                    let r = record(
                        "g",
                        &vec![false; k],
                        Some(&prefix),
                        RecordSource::MultiOneGeneration,
                    );
                    let fast = set_confidence(&r, NRegime::MultiGold).unwrap();
                    let mut p_any = 0.0;
                    for pattern in 0u32..(1 << k) {
                        if pattern == 0 {
                            continue;
                        }
                        let p: f64 = (0..k)
                            .map(|i| {
                                if pattern >> i & 1 == 1 {
                                    prefix[i]
                                } else {
                                    1.0 - prefix[i]
                                }
                            })
                            .product();
                        p_any += p;
                    }
                    assert!((fast - p_any).abs() < 1e-9, "{prefix:?}: {fast} vs {p_any}");
                    continue;
                }
                for q in grid {
                    let mut next = prefix.clone();
                    next.push(q);
                    stack.push(next);
                }
            }
        }
    }

    #[test]
    fn set_ece_examples() {
        // All set confidences 1.0 with pass@k 0.68 => single-bin gap 0.32.
        let records: Vec<SetRecord> = (0..100)
            .map(|i| {
                record(
                    &format!("r{i}"),
                    &[i < 68, false],
                    Some(&[0.7, 0.5]),
                    RecordSource::MultiOneGeneration,
                )
            })
            .collect();
        let value = set_ece(&records, NRegime::SingleGold, 10).unwrap();
        assert!((value - 0.32).abs() < 1e-12);
        assert_eq!(
            set_ece(&[], NRegime::SingleGold, 10),
            Err(MetricsError::EmptyInput)
        );
    }

    #[test]
    fn reliability_curve_partitions_points() {
        let points: Vec<(f64, bool)> = (0..25).map(|i| (i as f64 / 24.0, i % 2 == 0)).collect();
        let curve = reliability_curve(&points, 10).unwrap();
        assert_eq!(curve.len(), 10);
        assert_eq!(curve.iter().map(|b| b.count).sum::<usize>(), 25);
        for bin in &curve {
            assert_eq!(bin.count == 0, bin.mean_conf.is_none());
            assert_eq!(bin.count == 0, bin.mean_acc.is_none());
        }
        // The weighted gaps reproduce the ECE.
        let recomputed: f64 = curve
            .iter()
            .filter(|b| b.count > 0)
            .map(|b| b.count as f64 / 25.0 * (b.mean_acc.unwrap() - b.mean_conf.unwrap()).abs())
            .sum();
        assert!((recomputed - ece(&points, 10).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn ngram_overlap_examples() {
        assert_eq!(
            ngram_overlap(&["same text here", "same text here"], 2).unwrap(),
            1.0
        );
        assert_eq!(
            ngram_overlap(&["alpha beta", "gamma delta"], 2).unwrap(),
            0.0
        );
        let value = ngram_overlap(&["a b c", "a b d"], 2).unwrap();
        assert!((value - 1.0 / 3.0).abs() < 1e-12);
        assert!(ngram_overlap(&["only one"], 2).is_err());
    }

    #[test]
    fn token_efficiency_examples() {
        let multi: Vec<SetRecord> = (0..4)
            .map(|i| SetRecord {
                token_total: 560,
                ..record(
                    &format!("m{i}"),
                    &[true],
                    None,
                    RecordSource::MultiOneGeneration,
                )
            })
            .collect();
        let single: Vec<SetRecord> = (0..4)
            .map(|i| SetRecord {
                token_total: 1000,
                ..record(
                    &format!("s{i}"),
                    &[true],
                    None,
                    RecordSource::SingleKSamples,
                )
            })
            .collect();
        assert!((token_efficiency(&multi, &single).unwrap() - 0.56).abs() < 1e-12);
        assert_eq!(token_efficiency(&multi, &multi).unwrap(), 1.0);
        assert!(token_efficiency(&multi, &[]).is_err());

        let zeros: Vec<SetRecord> = single
            .iter()
            .map(|r| SetRecord {
                token_total: 0,
                ..r.clone()
            })
            .collect();
        assert_eq!(
            token_efficiency(&multi, &zeros),
            Err(MetricsError::ZeroDenominator)
        );
    }

    #[test]
    fn report_refuses_mixed_sources() {
        let a = record("a", &[true], None, RecordSource::MultiOneGeneration);
        let b = record("b", &[true], None, RecordSource::SingleKSamples);
        assert_eq!(
            compute_report(&[a, b], NRegime::SingleGold, 10, 0, 0),
            Err(MetricsError::MixedSources)
        );
    }

    #[test]
    fn report_fields_on_a_small_group() {
        let gold = GoldSpec::new(["x", "y"]).unwrap();
        let records: Vec<SetRecord> = [
            (["x", "a", "b"], [0.6, 0.2, 0.1]),
            (["c", "y", "x"], [0.5, 0.3, 0.2]),
        ]
        .iter()
        .enumerate()
        .map(|(i, (answers, confs))| {
            let answers: Vec<String> = answers.iter().map(|s| s.to_string()).collect();
            let bits = verify_set(&answers, &gold);
            SetRecord::new(
                format!("r{i}"),
                answers,
                Some(confs.to_vec()),
                bits,
                100 + i as u64,
                RecordSource::MultiOneGeneration,
            )
            .unwrap()
        })
        .collect();

        let report = compute_report(&records, NRegime::MultiGold, 10, 0, 0).unwrap();
        assert_eq!(report.n_records, 2);
        assert!((report.coverage_mean - 0.5).abs() < 1e-12);
        assert!((report.correct_count - 1.5).abs() < 1e-12);
        assert_eq!(report.pass1, 0.5); // first answers: x correct, c wrong
        assert_eq!(report.pass_at_k, 1.0);
        assert_eq!(report.uniqueness_mean, 3.0);
        assert!((report.avg_token_total - 100.5).abs() < 1e-12);
        assert!(report.brier_top1.is_some());
        assert!(report.pass1 <= report.pass_at_k);
    }

    proptest! {
        /// pass@k dominates pass@1 under either selection rule.
        #[test]
        fn pass_at_k_dominates_pass1(
            bit_rows in proptest::collection::vec(
                proptest::collection::vec(proptest::bool::ANY, 1..5),
                1..20,
            ),
            seed in 0u64..100,
        ) {
            let records: Vec<SetRecord> = bit_rows
                .iter()
                .enumerate()
                .map(|(i, bits)| record(&format!("r{i}"), bits, None, RecordSource::SingleKSamples))
                .collect();
            let p1 = pass1(&records, SelectionRule::UniformRandom, seed).unwrap();
            let pk = pass_at_k(&records).unwrap();
            prop_assert!(p1 <= pk + 1e-12);
            let p1f = pass1(&records, SelectionRule::First, seed).unwrap();
            prop_assert!(p1f <= pk + 1e-12);
        }

        /// ECE is bounded by 1 and zero for exactly-calibrated bins.
        #[test]
        fn ece_bounds(points in proptest::collection::vec((0.0f64..=1.0, proptest::bool::ANY), 1..200)) {
            let value = ece(&points, 10).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&value));
        }

        /// Set confidence is monotone nondecreasing in each confidence under
        /// the multi-gold rule.
        #[test]
        fn set_confidence_monotone(
            confs in proptest::collection::vec(0.0f64..=1.0, 1..5),
            slot in 0usize..5,
            bump in 0.0f64..=1.0,
        ) {
            let slot = slot % confs.len();
            let r = record("m", &vec![false; confs.len()], Some(&confs), RecordSource::MultiOneGeneration);
            let base = set_confidence(&r, NRegime::MultiGold).unwrap();
            let mut higher = confs.clone();
            higher[slot] = (higher[slot] + bump).min(1.0);
            let r2 = record("m", &vec![false; confs.len()], Some(&higher), RecordSource::MultiOneGeneration);
            let bumped = set_confidence(&r2, NRegime::MultiGold).unwrap();
            prop_assert!(bumped >= base - 1e-12);
        }
    }
}

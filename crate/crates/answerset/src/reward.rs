//! Reward functions for single- and multi-answer training, with the format
//! gate.
//!
//! The building blocks:
//!
//! ```text
//! correct_reward       = 1[answer in gold]
//! rlvr_multi_reward    = sum_i 1[answer_i in gold]
//! multi_brier          = (1/K) sum_i (q_i - 1[answer_i in gold])^2
//! rlcr_single_reward   = correct - (q - correct)^2
//! rlcr_multi_reward    = rlvr_multi_reward - multi_brier
//! ```
//!
//! The Brier penalty is a proper scoring rule: for a fixed correctness
//! probability p, the expected penalty is uniquely minimized at q = p, so
//! truthful confidences are optimal. The format gate zeroes the *entire*
//! total on any format violation (duplicate canonical answers, confidence sum
//! above one in the single-gold regime, or any parse defect), while keeping
//! the ungated components around for diagnostics.

use serde::{Deserialize, Serialize};

use crate::tagparse::FormatVerdict;
use crate::verify::{exact_match, verify_set, GoldSpec};

/// The components of one generation's reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    /// Set-level correctness sum (0/1 in single mode).
    pub correctness_sum: f64,
    /// Brier penalty in [0, 1]; 0 in uncalibrated modes.
    pub brier_penalty: f64,
    /// 1 when the format gate passed, 0 when it fired.
    pub format_multiplier: f64,
    /// `format_multiplier * (correctness_sum - brier_penalty + bonus)`.
    pub total: f64,
}

impl RewardBreakdown {
    /// A breakdown before gating: multiplier 1, total = sum - penalty.
    pub fn ungated(correctness_sum: f64, brier_penalty: f64) -> Self {
        Self {
            correctness_sum,
            brier_penalty,
            format_multiplier: 1.0,
            total: correctness_sum - brier_penalty,
        }
    }
}

/// Binary correctness reward.
pub fn correct_reward(answer: &str, gold: &GoldSpec) -> f64 {
    if exact_match(answer, gold) {
        1.0
    } else {
        0.0
    }
}

/// Correctness plus Brier calibration reward for a single answer:
/// `1[correct] - (q - 1[correct])^2`.
pub fn rlcr_single_reward(answer: &str, q: f64, gold: &GoldSpec) -> f64 {
    assert!((0.0..=1.0).contains(&q), "confidence {q} outside [0, 1]");
    let correct = correct_reward(answer, gold);
    correct - (q - correct) * (q - correct)
}

/// Set-level correctness reward: how many candidates belong to the gold set.
/// Integer-valued; duplicates each count (the gate handles uniqueness).
pub fn rlvr_multi_reward<S: AsRef<str>>(answers: &[S], gold: &GoldSpec) -> f64 {
    verify_set(answers, gold).count_correct() as f64
}

/// Mean squared error between confidences and correctness bits.
pub fn multi_brier_from_bits(confidences: &[f64], bits: &[bool]) -> f64 {
    assert_eq!(
        confidences.len(),
        bits.len(),
        "confidence/bit length mismatch"
    );
    assert!(!bits.is_empty(), "multi-brier needs at least one candidate");
    let sum: f64 = confidences
        .iter()
        .zip(bits)
        .map(|(q, b)| {
            assert!((0.0..=1.0).contains(q), "confidence {q} outside [0, 1]");
            let y = if *b { 1.0 } else { 0.0 };
            (q - y) * (q - y)
        })
        .sum();
    sum / bits.len() as f64
}

/// Multi-answer Brier penalty: `(1/K) sum_i (q_i - 1[answer_i in gold])^2`.
pub fn multi_brier<S: AsRef<str>>(answers: &[S], confidences: &[f64], gold: &GoldSpec) -> f64 {
    assert_eq!(
        answers.len(),
        confidences.len(),
        "answer/confidence length mismatch"
    );
    multi_brier_from_bits(confidences, &verify_set(answers, gold).bits)
}

/// Combined multi-answer objective: coverage minus the Brier penalty.
pub fn rlcr_multi_reward<S: AsRef<str>>(
    answers: &[S],
    confidences: &[f64],
    gold: &GoldSpec,
) -> f64 {
    rlvr_multi_reward(answers, gold) - multi_brier(answers, confidences, gold)
}

/// Apply the format gate: a failed verdict zeroes the total while keeping the
/// ungated components for diagnostics.
pub fn apply_format_gate(breakdown: RewardBreakdown, verdict: &FormatVerdict) -> RewardBreakdown {
    apply_format_gate_with_bonus(breakdown, verdict, 0.0)
}

/// [`apply_format_gate`] with an additive bonus granted on a clean verdict.
/// The default bonus is 0; the gate itself carries the format incentive.
pub fn apply_format_gate_with_bonus(
    breakdown: RewardBreakdown,
    verdict: &FormatVerdict,
    format_bonus: f64,
) -> RewardBreakdown {
    if verdict.ok {
        RewardBreakdown {
            format_multiplier: 1.0,
            total: breakdown.correctness_sum - breakdown.brier_penalty + format_bonus,
            ..breakdown
        }
    } else {
        RewardBreakdown {
            format_multiplier: 0.0,
            total: 0.0,
            ..breakdown
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagparse::{parse, validate_format, NRegime, RawGeneration, TagSchema, Violation};
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn medical_gold() -> GoldSpec {
        GoldSpec::new([
            "Pneumonia",
            "Pulmonary neoplasm",
            "Bronchitis",
            "Tuberculosis",
            "Possible NSTEMI / STEMI",
            "GERD",
            "Unstable angina",
            "Pericarditis",
            "Stable angina",
        ])
        .unwrap()
    }

    #[test]
    fn correct_reward_examples() {
        let gold = medical_gold();
        assert_eq!(correct_reward("Tuberculosis", &gold), 1.0);
        assert_eq!(correct_reward("tension headache", &gold), 0.0);
    }

    #[test]
    fn rlcr_single_examples() {
        let gold = GoldSpec::new(["x"]).unwrap();
        assert_eq!(rlcr_single_reward("x", 1.0, &gold), 1.0);
        assert_eq!(rlcr_single_reward("y", 0.0, &gold), 0.0);
        assert!((rlcr_single_reward("x", 0.75, &gold) - 0.9375).abs() < 1e-12);
        // Worst cases: confidently wrong, or diffident and right.
        assert_eq!(rlcr_single_reward("y", 1.0, &gold), -1.0);
        assert_eq!(rlcr_single_reward("x", 0.0, &gold), 0.0);
    }

    #[test]
    fn rlvr_multi_examples() {
        let gold = medical_gold();
        let r = rlvr_multi_reward(&["Pulmonary Embolism", "Pneumonia", "Tuberculosis"], &gold);
        assert_eq!(r, 2.0);

        // Full recovery: every candidate in gold.
        assert_eq!(rlvr_multi_reward(&["GERD", "Pericarditis"], &gold), 2.0);
        // K = 1 reduces to the binary reward.
        assert_eq!(rlvr_multi_reward(&["Tuberculosis"], &gold), 1.0);
    }

    #[test]
    fn multi_brier_examples() {
        let gold = GoldSpec::new(["a0"]).unwrap();
        let answers = ["a0", "a1", "a2"];
        let q = [0.40, 0.30, 0.30];
        let expected = (0.36 + 0.09 + 0.09) / 3.0;
        assert!((multi_brier(&answers, &q, &gold) - expected).abs() < 1e-12);
        assert!((multi_brier(&answers, &q, &gold) - 0.18).abs() < 1e-12);

        // Confidences equal to the bits: zero penalty.
        assert_eq!(multi_brier(&answers, &[1.0, 0.0, 0.0], &gold), 0.0);

        // K = 1 reduces to the single Brier penalty.
        let single = multi_brier(&["a1"], &[0.3], &gold);
        assert!((single - 0.09).abs() < 1e-12);
    }

    #[test]
    fn rlcr_multi_examples() {
        let gold = GoldSpec::new(["a0"]).unwrap();
        let r = rlcr_multi_reward(&["a0", "a1", "a2"], &[0.40, 0.30, 0.30], &gold);
        assert!((r - 0.82).abs() < 1e-12);

        let gold3 = GoldSpec::new(["a0", "a1", "a2"]).unwrap();
        assert_eq!(
            rlcr_multi_reward(&["a0", "a1", "a2"], &[1.0, 1.0, 1.0], &gold3),
            3.0
        );
        assert_eq!(
            rlcr_multi_reward(&["b0", "b1", "b2"], &[0.0, 0.0, 0.0], &gold3),
            0.0
        );
    }

    #[test]
    fn format_gate_examples() {
        let gold = GoldSpec::new(["a"]).unwrap();
        let schema = TagSchema::multi(3, true, NRegime::SingleGold).unwrap();

        // Duplicate answers zero the total regardless of correctness.
        let text = "<think>t</think>\
                    <answer1>a</answer1><confidence1>0.4</confidence1>\
                    <answer2>b</answer2><confidence2>0.3</confidence2>\
                    <answer3>A</answer3><confidence3>0.3</confidence3>";
        let parsed = parse(&RawGeneration::new(text, 0), &schema);
        let verdict = validate_format(&parsed, &schema);
        assert!(verdict.violations.contains(&Violation::DuplicateAnswer));
        let q = parsed.valid_confidences().unwrap();
        let ungated = RewardBreakdown::ungated(
            rlvr_multi_reward(&parsed.answers, &gold),
            multi_brier(&parsed.answers, &q, &gold),
        );
        let gated = apply_format_gate(ungated, &verdict);
        assert_eq!(gated.total, 0.0);
        assert_eq!(gated.format_multiplier, 0.0);
        assert_eq!(gated.correctness_sum, 2.0); // diagnostics preserved

        // A clean verdict leaves the total unchanged.
        let clean = FormatVerdict {
            ok: true,
            violations: vec![],
        };
        let gated = apply_format_gate(RewardBreakdown::ungated(1.0, 0.18), &clean);
        assert!((gated.total - 0.82).abs() < 1e-12);
        assert_eq!(gated.format_multiplier, 1.0);

        // Confidence sum 1.1 in the single-gold regime zeroes the total.
        let text = "<think>t</think>\
                    <answer1>a</answer1><confidence1>0.5</confidence1>\
                    <answer2>b</answer2><confidence2>0.4</confidence2>\
                    <answer3>c</answer3><confidence3>0.2</confidence3>";
        let parsed = parse(&RawGeneration::new(text, 0), &schema);
        let verdict = validate_format(&parsed, &schema);
        assert_eq!(verdict.violations, vec![Violation::ConfSumExceedsOne]);
        let gated = apply_format_gate(RewardBreakdown::ungated(1.0, 0.2), &verdict);
        assert_eq!(gated.total, 0.0);
    }

    #[test]
    fn format_bonus_is_additive_on_clean_verdicts() {
        let clean = FormatVerdict {
            ok: true,
            violations: vec![],
        };
        let bad = FormatVerdict {
            ok: false,
            violations: vec![Violation::DuplicateAnswer],
        };
        let b = RewardBreakdown::ungated(2.0, 0.5);
        assert!((apply_format_gate_with_bonus(b, &clean, 0.25).total - 1.75).abs() < 1e-12);
        assert_eq!(apply_format_gate_with_bonus(b, &bad, 0.25).total, 0.0);
    }

    /// Expected single-answer reward when correctness is Bernoulli(p):
    /// p * (1 - (q-1)^2) + (1-p) * (1 - q^2), evaluated through the real
    /// reward path by weighting the two outcomes.
    fn expected_single_reward(p: f64, q: f64) -> f64 {
        let hit = GoldSpec::new(["a"]).unwrap();
        p * rlcr_single_reward("a", q, &hit) + (1.0 - p) * rlcr_single_reward("b", q, &hit)
    }

    /// Expected Multi-Brier with K = 3 independent Bernoulli(p) bits and a
    /// shared confidence q, enumerated over all 8 outcome patterns.
    fn expected_multi_brier(p: f64, q: f64) -> f64 {
        let answers = ["a0", "a1", "a2"];
        let mut total = 0.0;
        for pattern in 0u32..8 {
            let bits: Vec<bool> = (0..3).map(|i| pattern >> i & 1 == 1).collect();
            let weight: f64 = bits.iter().map(|b| if *b { p } else { 1.0 - p }).product();
            let gold_answers: Vec<&str> = answers
                .iter()
                .zip(&bits)
                .filter(|(_, b)| **b)
                .map(|(a, _)| *a)
                .collect();
            let penalty = match GoldSpec::new(gold_answers.clone()) {
                Ok(gold) => multi_brier(&answers, &[q, q, q], &gold),
                Err(_) => multi_brier_from_bits(&[q, q, q], &bits),
            };
            total += weight * penalty;
        }
        total
    }

    #[test]
    fn proper_scoring_grid_search() {
        for step in 1..=9 {
            let p = step as f64 / 10.0;
            let (mut best_q, mut best_v) = (f64::NAN, f64::NEG_INFINITY);
            let (mut best_qm, mut best_vm) = (f64::NAN, f64::INFINITY);
            for g in 0..=100 {
                let q = g as f64 / 100.0;
                let v = expected_single_reward(p, q);
                if v > best_v {
                    (best_q, best_v) = (q, v);
                }
                let m = expected_multi_brier(p, q);
                if m < best_vm {
                    (best_qm, best_vm) = (q, m);
                }
            }
            assert!((best_q - p).abs() < 0.01 + 1e-12, "p={p} argmax={best_q}");
            assert!((best_qm - p).abs() < 0.01 + 1e-12, "p={p} argmin={best_qm}");
        }
    }

    #[test]
    fn reduction_chain_on_randomized_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let gold = GoldSpec::new(["a0", "a1"]).unwrap();
        for _ in 0..10_000 {
            let answer = format!("a{}", rng.random_range(0..4));
            let q: f64 = rng.random();
            let single = [answer.clone()];
            assert_eq!(
                rlvr_multi_reward(&single, &gold),
                correct_reward(&answer, &gold)
            );
            let multi = rlcr_multi_reward(&single, &[q], &gold);
            assert_eq!(multi, rlcr_single_reward(&answer, q, &gold));
        }
    }

    proptest! {
        /// All rewards are invariant under jointly permuting answers and
        /// confidences.
        #[test]
        fn set_permutation_invariance(
            pairs in proptest::collection::vec(("[a-d]", 0.0f64..=1.0), 1..6),
            rotation in 0usize..6,
        ) {
            let gold = GoldSpec::new(["a", "b"]).unwrap();
            let answers: Vec<String> = pairs.iter().map(|(a, _)| a.clone()).collect();
            let confs: Vec<f64> = pairs.iter().map(|(_, q)| *q).collect();
            let before = rlcr_multi_reward(&answers, &confs, &gold);
            let cov_before = rlvr_multi_reward(&answers, &gold);
            let mut pairs = pairs;
            let r = rotation % pairs.len();
            pairs.rotate_left(r);
            let answers: Vec<String> = pairs.iter().map(|(a, _)| a.clone()).collect();
            let confs: Vec<f64> = pairs.iter().map(|(_, q)| *q).collect();
            prop_assert!((rlcr_multi_reward(&answers, &confs, &gold) - before).abs() < 1e-12);
            prop_assert_eq!(rlvr_multi_reward(&answers, &gold), cov_before);
        }

        /// Bounds: 0 <= coverage reward <= min(K, N) for distinct answers, and
        /// the combined reward lies in [-1, K].
        #[test]
        fn reward_bounds(
            raw in proptest::collection::vec(("[a-f]{1,2}", 0.0f64..=1.0), 1..6),
        ) {
            let gold = GoldSpec::new(["a", "bb", "c"]).unwrap();
            // Deduplicate to model gate-passing sets.
            let mut answers: Vec<String> = Vec::new();
            let mut confs = Vec::new();
            for (a, q) in &raw {
                if !answers.contains(a) {
                    answers.push(a.clone());
                    confs.push(*q);
                }
            }
            let k = answers.len();
            let cov = rlvr_multi_reward(&answers, &gold);
            prop_assert!(cov >= 0.0);
            prop_assert!(cov <= k.min(gold.n()) as f64);
            let combined = rlcr_multi_reward(&answers, &confs, &gold);
            prop_assert!(combined >= -1.0 - 1e-12);
            prop_assert!(combined <= k as f64 + 1e-12);
        }
    }
}

//! Desk-scale GRPO trainer over tabular policies on synthetic multi-answer
//! tasks.
//!
//! A policy is a logit per vocabulary answer plus, per rank slot, a logit per
//! cell of a 21-point confidence grid. Sets are drawn by sequential sampling
//! without replacement from the temperature-scaled softmax (Plackett–Luce),
//! which guarantees distinct answers, and confidences are drawn per slot from
//! the grid softmax. Each rollout group is scored through the same
//! verify/reward path as external dumps, advantages are group-mean-relative
//! (no standard-deviation normalization), and updates follow the score-
//! function gradient computed in closed form.
//!
//! Training is deterministic given the seed: one ChaCha stream drives
//! sampling, and independent runs (sweep cells, evaluations) derive their own
//! streams.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reward::{apply_format_gate, multi_brier_from_bits, RewardBreakdown};
use crate::tagparse::{FormatVerdict, NRegime, Violation, CONF_SUM_EPSILON};
use crate::verify::{verify_set, GoldSpec};

/// The verbalized-confidence action space: 0.00 to 1.00 in steps of 0.05.
pub const CONF_GRID: [f64; 21] = [
    0.00, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75,
    0.80, 0.85, 0.90, 0.95, 1.00,
];

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("gold ids must be a nonempty subset of 0..vocab_size")]
    BadGoldIds,
    #[error("noise probability for answer {id} is {p}, outside [0, 1]")]
    BadNoise { id: usize, p: f64 },
    #[error("cannot draw {k} distinct answers from a vocabulary of {vocab}")]
    KTooLarge { k: usize, vocab: usize },
    #[error("group size must be at least 2 for a group-relative baseline")]
    GroupTooSmall,
    #[error("single-answer modes require k = 1, got k = {0}")]
    SingleNeedsKOne(usize),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("temperature must be nonnegative")]
    BadTemperature,
    #[error("learning rate must be positive and finite")]
    BadLearningRate,
    #[error("advantages need at least 2 rewards")]
    TooFewRewards,
    #[error("sample/advantage count mismatch: {samples} vs {advantages}")]
    AdvantageMismatch { samples: usize, advantages: usize },
    #[error("non-finite {what} at step {step}")]
    NonFinite { what: String, step: usize },
}

/// A synthetic task: a finite answer universe with a gold subset, optionally
/// with stochastic per-answer correctness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTask {
    pub vocab_size: usize,
    pub gold_ids: BTreeSet<usize>,
    /// Per-answer correctness probability; answers not listed are
    /// deterministically correct iff they are gold.
    pub noise: BTreeMap<usize, f64>,
}

impl ToyTask {
    pub fn new(
        vocab_size: usize,
        gold_ids: impl IntoIterator<Item = usize>,
    ) -> Result<Self, SimError> {
        let gold_ids: BTreeSet<usize> = gold_ids.into_iter().collect();
        if gold_ids.is_empty() || gold_ids.iter().any(|id| *id >= vocab_size) {
            return Err(SimError::BadGoldIds);
        }
        Ok(Self {
            vocab_size,
            gold_ids,
            noise: BTreeMap::new(),
        })
    }

    pub fn with_noise(
        mut self,
        noise: impl IntoIterator<Item = (usize, f64)>,
    ) -> Result<Self, SimError> {
        for (id, p) in noise {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::BadNoise { id, p });
            }
            self.noise.insert(id, p);
        }
        Ok(self)
    }

    /// Number of gold answers.
    pub fn n(&self) -> usize {
        self.gold_ids.len()
    }

    /// Single-gold tasks carry the confidence-sum constraint.
    pub fn n_regime(&self) -> NRegime {
        if self.n() == 1 {
            NRegime::SingleGold
        } else {
            NRegime::MultiGold
        }
    }

    /// Text label for an answer id, so sets flow through the same
    /// verify/reward path as parsed generations.
    pub fn label(id: usize) -> String {
        format!("a{id}")
    }

    pub fn gold_spec(&self) -> GoldSpec {
        GoldSpec::new(self.gold_ids.iter().map(|id| Self::label(*id)))
            .expect("gold ids are nonempty")
    }
}

/// Tabular policy: answer logits shared across slots (set sampling handles
/// distinctness) plus per-slot confidence-grid logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub answer_logits: Vec<f64>,
    pub conf_logits: Vec<Vec<f64>>,
}

impl PolicyParams {
    /// Uniform (all-zero-logit) initialization for `k` rank slots.
    pub fn zeros(vocab_size: usize, k: usize) -> Self {
        Self {
            answer_logits: vec![0.0; vocab_size],
            conf_logits: vec![vec![0.0; CONF_GRID.len()]; k],
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.answer_logits.len()
    }

    fn check_finite(&self, step: usize) -> Result<(), SimError> {
        if self.answer_logits.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite {
                what: "answer logits".into(),
                step,
            });
        }
        if self.conf_logits.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite {
                what: "confidence logits".into(),
                step,
            });
        }
        Ok(())
    }
}

/// Which objective scores a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    RlvrSingle,
    RlvrMulti,
    RlcrSingle,
    RlcrMulti,
}

impl TrainMode {
    pub fn calibrated(&self) -> bool {
        matches!(self, TrainMode::RlcrSingle | TrainMode::RlcrMulti)
    }

    pub fn is_multi(&self) -> bool {
        matches!(self, TrainMode::RlvrMulti | TrainMode::RlcrMulti)
    }
}

/// Trainer hyperparameters. Defaults: 32 rollouts per group at temperature
/// 0.7, learning rate 0.1, 500 steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub k: usize,
    pub group_size: usize,
    pub temperature: f64,
    pub learning_rate: f64,
    pub steps: usize,
    pub mode: TrainMode,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(mode: TrainMode, k: usize) -> Self {
        Self {
            k,
            group_size: 32,
            temperature: 0.7,
            learning_rate: 0.1,
            steps: 500,
            mode,
            seed: 0,
        }
    }

    pub fn validate(&self, task: &ToyTask) -> Result<(), SimError> {
        if self.k == 0 {
            return Err(SimError::ZeroK);
        }
        if self.k > task.vocab_size {
            return Err(SimError::KTooLarge {
                k: self.k,
                vocab: task.vocab_size,
            });
        }
        if self.group_size < 2 {
            return Err(SimError::GroupTooSmall);
        }
        if !self.mode.is_multi() && self.k != 1 {
            return Err(SimError::SingleNeedsKOne(self.k));
        }
        if self.temperature <= 0.0 || !self.temperature.is_finite() {
            return Err(SimError::BadTemperature);
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(SimError::BadLearningRate);
        }
        Ok(())
    }
}

/// Per-step training series. `mean_brier` is tracked in calibrated modes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainStats {
    pub mean_reward: Vec<f64>,
    pub coverage_mean: Vec<f64>,
    pub unique_correct: Vec<f64>,
    pub policy_entropy: Vec<f64>,
    pub mean_brier: Option<Vec<f64>>,
}

impl TrainStats {
    pub fn steps(&self) -> usize {
        self.mean_reward.len()
    }
}

/// One drawn action: an ordered set of distinct answer ids, per-slot grid
/// confidences, and the joint log-probability of the draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawnSet {
    pub answer_ids: Vec<usize>,
    pub confidences: Vec<f64>,
    pub conf_cells: Vec<usize>,
    pub log_prob: f64,
}

/// One scored rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutSample {
    pub set: DrawnSet,
    pub bits: Vec<bool>,
    pub breakdown: RewardBreakdown,
}

// ---------------------------------------------------------------------------
// Softmax primitives (shared by sampling, log-probs, and gradients)
// ---------------------------------------------------------------------------

/// Softmax of `logits[i]/temperature` restricted toancestors where
/// `available[i]`; zero elsewhere.
fn masked_softmax(logits: &[f64], temperature: f64, available: &[bool]) -> Vec<f64> {
    let max = logits
        .iter()
        .zip(available)
        .filter(|(_, a)| **a)
        .map(|(v, _)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut weights = vec![0.0; logits.len()];
    let mut total = 0.0;
    for i in 0..logits.len() {
        if available[i] {
            let w = ((logits[i] - max) / temperature).exp();
            weights[i] = w;
            total += w;
        }
    }
    for w in &mut weights {
        *w /= total;
    }
    weights
}

fn draw_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_nonzero = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last_nonzero
}

/// Log-probability of drawing `sequence` (distinct indices, in order) by
/// sequential sampling without replacement from softmax(logits/temperature).
pub fn plackett_luce_log_prob(logits: &[f64], temperature: f64, sequence: &[usize]) -> f64 {
    let mut available = vec![true; logits.len()];
    let mut log_prob = 0.0;
    for &id in sequence {
        let probs = masked_softmax(logits, temperature, &available);
        log_prob += probs[id].ln();
        available[id] = false;
    }
    log_prob
}

/// Closed-form gradient of [`plackett_luce_log_prob`] with respect to the
/// logits: `(1/T) * sum_j (onehot(a_j) - p_j)` over the per-step masked
/// softmax distributions `p_j`.
pub fn plackett_luce_grad(logits: &[f64], temperature: f64, sequence: &[usize]) -> Vec<f64> {
    let mut available = vec![true; logits.len()];
    let mut grad = vec![0.0; logits.len()];
    for &id in sequence {
        let probs = masked_softmax(logits, temperature, &available);
        for (g, p) in grad.iter_mut().zip(&probs) {
            *g -= p / temperature;
        }
        grad[id] += 1.0 / temperature;
        available[id] = false;
    }
    grad
}

/// Log-probability of one categorical draw from softmax(logits/temperature).
pub fn categorical_log_prob(logits: &[f64], temperature: f64, cell: usize) -> f64 {
    let available = vec![true; logits.len()];
    masked_softmax(logits, temperature, &available)[cell].ln()
}

/// Gradient of [`categorical_log_prob`] with respect to the logits.
pub fn categorical_grad(logits: &[f64], temperature: f64, cell: usize) -> Vec<f64> {
    let available = vec![true; logits.len()];
    let probs = masked_softmax(logits, temperature, &available);
    let mut grad: Vec<f64> = probs.iter().map(|p| -p / temperature).collect();
    grad[cell] += 1.0 / temperature;
    grad
}

/// Entropy (nats) of the policy's first-draw answer distribution at the given
/// sampling temperature.
pub fn policy_entropy(policy: &PolicyParams, temperature: f64) -> f64 {
    let available = vec![true; policy.vocab_size()];
    let probs = masked_softmax(&policy.answer_logits, temperature, &available);
    -probs
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

// ---------------------------------------------------------------------------
// Sampling and rollouts
// ---------------------------------------------------------------------------

/// Draw `k` distinct answers (Plackett–Luce) and one grid confidence per
/// slot. `temperature == 0.0` is the greedy limit: the `k` highest-logit
/// answers in descending-logit order (ties to the lowest index) and argmax
/// confidence cells, with `log_prob` 0.
pub fn sample_set(
    policy: &PolicyParams,
    k: usize,
    temperature: f64,
    rng: &mut impl Rng,
) -> Result<DrawnSet, SimError> {
    let vocab = policy.vocab_size();
    if k > vocab {
        return Err(SimError::KTooLarge { k, vocab });
    }
    if temperature == 0.0 {
        let mut order: Vec<usize> = (0..vocab).collect();
        order.sort_by(|a, b| {
            policy.answer_logits[*b]
                .partial_cmp(&policy.answer_logits[*a])
                .unwrap()
                .then(a.cmp(b))
        });
        let answer_ids: Vec<usize> = order.into_iter().take(k).collect();
        let conf_cells: Vec<usize> = (0..k)
            .map(|slot| {
                let row = &policy.conf_logits[slot];
                (0..row.len())
                    .max_by(|a, b| row[*a].partial_cmp(&row[*b]).unwrap().then(b.cmp(a)))
                    .unwrap()
            })
            .collect();
        let confidences = conf_cells.iter().map(|c| CONF_GRID[*c]).collect();
        return Ok(DrawnSet {
            answer_ids,
            confidences,
            conf_cells,
            log_prob: 0.0,
        });
    }

    let mut available = vec![true; vocab];
    let mut answer_ids = Vec::with_capacity(k);
    let mut log_prob = 0.0;
    for _ in 0..k {
        let probs = masked_softmax(&policy.answer_logits, temperature, &available);
        let id = draw_categorical(&probs, rng);
        log_prob += probs[id].ln();
        available[id] = false;
        answer_ids.push(id);
    }

    let mut conf_cells = Vec::with_capacity(k);
    let mut confidences = Vec::with_capacity(k);
    for slot in 0..k {
        let row = &policy.conf_logits[slot];
        let all = vec![true; row.len()];
        let probs = masked_softmax(row, temperature, &all);
        let cell = draw_categorical(&probs, rng);
        log_prob += probs[cell].ln();
        conf_cells.push(cell);
        confidences.push(CONF_GRID[cell]);
    }

    Ok(DrawnSet {
        answer_ids,
        confidences,
        conf_cells,
        log_prob,
    })
}

/// Correctness bits for a drawn set: deterministic gold membership through
/// the verifier, with noisy answers resampled per draw.
fn draw_bits(task: &ToyTask, ids: &[usize], rng: &mut impl Rng) -> Vec<bool> {
    let labels: Vec<String> = ids.iter().map(|id| ToyTask::label(*id)).collect();
    let gold = task.gold_spec();
    let mut bits = verify_set(&labels, &gold).bits;
    for (slot, id) in ids.iter().enumerate() {
        if let Some(p) = task.noise.get(id) {
            bits[slot] = rng.random::<f64>() < *p;
        }
    }
    bits
}

/// Score one drawn set under a training mode, including the format gate.
/// Distinctness holds by construction, so the gate only fires on the
/// confidence-sum rule in calibrated single-gold settings.
fn score_set(task: &ToyTask, mode: TrainMode, set: &DrawnSet, bits: &[bool]) -> RewardBreakdown {
    let correctness_sum = bits.iter().filter(|b| **b).count() as f64;
    let brier_penalty = if mode.calibrated() {
        multi_brier_from_bits(&set.confidences, bits)
    } else {
        0.0
    };
    let mut violations = Vec::new();
    if mode.calibrated() && task.n_regime() == NRegime::SingleGold {
        let sum: f64 = set.confidences.iter().sum();
        if sum > 1.0 + CONF_SUM_EPSILON {
            violations.push(Violation::ConfSumExceedsOne);
        }
    }
    let verdict = FormatVerdict {
        ok: violations.is_empty(),
        violations,
    };
    apply_format_gate(
        RewardBreakdown::ungated(correctness_sum, brier_penalty),
        &verdict,
    )
}

/// Draw and score a single set under the configured mode.
pub fn sample_scored(
    task: &ToyTask,
    policy: &PolicyParams,
    config: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<RolloutSample, SimError> {
    let set = sample_set(policy, config.k, config.temperature, rng)?;
    let bits = draw_bits(task, &set.answer_ids, rng);
    let breakdown = score_set(task, config.mode, &set, &bits);
    Ok(RolloutSample {
        set,
        bits,
        breakdown,
    })
}

/// Draw and score one group of rollouts.
pub fn rollout(
    task: &ToyTask,
    policy: &PolicyParams,
    config: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<Vec<RolloutSample>, SimError> {
    (0..config.group_size)
        .map(|_| sample_scored(task, policy, config, rng))
        .collect()
}

// ---------------------------------------------------------------------------
// GRPO updates
// ---------------------------------------------------------------------------

/// Group-relative advantages: reward minus the group mean. No division by
/// the standard deviation.
pub fn grpo_advantages(rewards: &[f64]) -> Result<Vec<f64>, SimError> {
    if rewards.len() < 2 {
        return Err(SimError::TooFewRewards);
    }
    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    Ok(rewards.iter().map(|r| r - mean).collect())
}

/// One gradient-ascent step on `sum_i advantage_i * grad log pi(sample_i)`.
/// Confidence gradients are applied only in calibrated modes (uncalibrated
/// rewards never depend on the confidence draw).
pub fn update(
    policy: &mut PolicyParams,
    samples: &[RolloutSample],
    advantages: &[f64],
    learning_rate: f64,
    config: &TrainConfig,
) -> Result<(), SimError> {
    if samples.len() != advantages.len() {
        return Err(SimError::AdvantageMismatch {
            samples: samples.len(),
            advantages: advantages.len(),
        });
    }
    let mut answer_grad = vec![0.0; policy.vocab_size()];
    let mut conf_grad = vec![vec![0.0; CONF_GRID.len()]; policy.conf_logits.len()];
    for (sample, advantage) in samples.iter().zip(advantages) {
        if *advantage == 0.0 {
            continue;
        }
        let g = plackett_luce_grad(
            &policy.answer_logits,
            config.temperature,
            &sample.set.answer_ids,
        );
        for (acc, gi) in answer_grad.iter_mut().zip(&g) {
            *acc += advantage * gi;
        }
        if config.mode.calibrated() {
            for (slot, cell) in sample.set.conf_cells.iter().enumerate() {
                let g = categorical_grad(&policy.conf_logits[slot], config.temperature, *cell);
                for (acc, gi) in conf_grad[slot].iter_mut().zip(&g) {
                    *acc += advantage * gi;
                }
            }
        }
    }
    if answer_grad.iter().any(|g| !g.is_finite())
        || conf_grad.iter().flatten().any(|g| !g.is_finite())
    {
        return Err(SimError::NonFinite {
            what: "gradient".into(),
            step: 0,
        });
    }
    for (z, g) in policy.answer_logits.iter_mut().zip(&answer_grad) {
        *z += learning_rate * g;
    }
    for (row, grow) in policy.conf_logits.iter_mut().zip(&conf_grad) {
        for (z, g) in row.iter_mut().zip(grow) {
            *z += learning_rate * g;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Training and evaluation
// ---------------------------------------------------------------------------

fn group_stats(
    task: &ToyTask,
    config: &TrainConfig,
    samples: &[RolloutSample],
    stats: &mut TrainStats,
    policy: &PolicyParams,
) {
    let n = samples.len() as f64;
    stats
        .mean_reward
        .push(samples.iter().map(|s| s.breakdown.total).sum::<f64>() / n);
    stats.coverage_mean.push(
        samples
            .iter()
            .map(|s| s.breakdown.correctness_sum / config.k as f64)
            .sum::<f64>()
            / n,
    );
    // Sets are distinct by construction, so distinct-correct per set is the
    // number of correct slots.
    stats.unique_correct.push(
        samples
            .iter()
            .map(|s| s.bits.iter().filter(|b| **b).count() as f64)
            .sum::<f64>()
            / n,
    );
    stats
        .policy_entropy
        .push(policy_entropy(policy, config.temperature));
    if let Some(series) = stats.mean_brier.as_mut() {
        series.push(
            samples
                .iter()
                .map(|s| s.breakdown.brier_penalty)
                .sum::<f64>()
                / n,
        );
    }
    let _ = task;
}

/// Run the full loop: rollout, group-relative advantages, update. Returns the
/// trained policy and the per-step series. Deterministic given the seed.
pub fn train(task: &ToyTask, config: &TrainConfig) -> Result<(PolicyParams, TrainStats), SimError> {
    config.validate(task)?;
    let mut policy = PolicyParams::zeros(task.vocab_size, config.k);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut stats = TrainStats {
        mean_brier: config.mode.calibrated().then(Vec::new),
        ..TrainStats::default()
    };
    for step in 0..config.steps {
        let samples = rollout(task, &policy, config, &mut rng)?;
        let rewards: Vec<f64> = samples.iter().map(|s| s.breakdown.total).collect();
        let advantages = grpo_advantages(&rewards)?;
        update(
            &mut policy,
            &samples,
            &advantages,
            config.learning_rate,
            config,
        )
        .and_then(|()| policy.check_finite(step))
        .map_err(|e| match e {
            SimError::NonFinite { what, .. } => SimError::NonFinite { what, step },
            other => other,
        })?;
        group_stats(task, config, &samples, &mut stats, &policy);
    }
    Ok((policy, stats))
}

/// Final-policy evaluation over freshly sampled sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub n_sets: usize,
    /// Mean fraction of each set that is correct.
    pub coverage_mean: f64,
    /// Mean distinct correct answers per set.
    pub unique_correct: f64,
    /// Distinct answer ids across all evaluation sets.
    pub distinct_answers: usize,
    /// Mean per-set Brier penalty (calibrated evaluations).
    pub mean_brier: Option<f64>,
    /// Per answer id: (sum of sampled confidences, number of samples).
    pub confidence_totals: BTreeMap<usize, (f64, usize)>,
}

impl EvalSummary {
    /// Mean sampled confidence attached to one answer id.
    pub fn mean_confidence(&self, id: usize) -> Option<f64> {
        self.confidence_totals
            .get(&id)
            .map(|(sum, count)| sum / *count as f64)
    }
}

/// Evaluate a policy over `n_sets` sampled sets.
pub fn evaluate_policy(
    task: &ToyTask,
    policy: &PolicyParams,
    config: &TrainConfig,
    n_sets: usize,
    rng: &mut impl Rng,
) -> Result<EvalSummary, SimError> {
    let mut coverage_sum = 0.0;
    let mut unique_sum = 0.0;
    let mut brier_sum = 0.0;
    let mut distinct = BTreeSet::new();
    let mut confidence_totals: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for _ in 0..n_sets {
        let RolloutSample { set, bits, .. } = sample_scored(task, policy, config, rng)?;
        let correct = bits.iter().filter(|b| **b).count() as f64;
        coverage_sum += correct / config.k as f64;
        unique_sum += correct;
        distinct.extend(set.answer_ids.iter().copied());
        if config.mode.calibrated() {
            brier_sum += multi_brier_from_bits(&set.confidences, &bits);
            for (id, q) in set.answer_ids.iter().zip(&set.confidences) {
                let entry = confidence_totals.entry(*id).or_insert((0.0, 0));
                entry.0 += q;
                entry.1 += 1;
            }
        }
    }
    let n = n_sets as f64;
    Ok(EvalSummary {
        n_sets,
        coverage_mean: coverage_sum / n,
        unique_correct: unique_sum / n,
        distinct_answers: distinct.len(),
        mean_brier: config.mode.calibrated().then(|| brier_sum / n),
        confidence_totals,
    })
}

/// One row of a k-sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub k: usize,
    pub unique_correct: f64,
    pub coverage_mean: f64,
}

/// Train one policy per k and evaluate each over `eval_sets` sampled sets.
/// Each cell derives its own generator streams from the base seed.
pub fn sweep_k(
    task: &ToyTask,
    base: &TrainConfig,
    k_values: &[usize],
    eval_sets: usize,
) -> Result<Vec<(SweepCell, TrainStats)>, SimError> {
    let mut cells = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let config = TrainConfig {
            k,
            seed: base.seed.wrapping_add(1000 * k as u64),
            ..*base
        };
        let (policy, stats) = train(task, &config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0e7a);
        let summary = evaluate_policy(task, &policy, &config, eval_sets, &mut rng)?;
        cells.push((
            SweepCell {
                k,
                unique_correct: summary.unique_correct,
                coverage_mean: summary.coverage_mean,
            },
            stats,
        ));
    }
    Ok(cells)
}

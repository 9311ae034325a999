//! Dump ingestion, scoring/evaluation/overlap runners, simulator experiments,
//! and deterministic CSV report writers.
//!
//! Input is line-delimited JSON, one [`DumpRecord`] per line:
//!
//! ```json
//! {"id":"q1","method":"multi_cal","mode":"multi","calibrated":true,"k":3,
//!  "generations":[{"text":"<think>..</think><answer1>..</answer1>...","token_count":412}],
//!  "gold":{"answers":["Pneumonia","Tuberculosis"],"n_regime":"multi_gold"}}
//! ```
//!
//! A multi-mode record carries one generation holding all K answers; a
//! single-mode record carries K independent generations forming the set.
//! Malformed lines are collected with their line numbers instead of aborting
//! the run. Token counts are producer-supplied and never recomputed.
//!
//! Reports are CSV with a fixed column order; identical inputs, seed, and
//! flags produce byte-identical files. Evaluation groups records by
//! (method, source) and never pools calibration metrics across sources.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calib::{
    self, compute_report, report_curves, CalibrationBin, MetricsError, MetricsReport, RecordSource,
    SetRecord,
};
use crate::reward::{apply_format_gate, multi_brier_from_bits, rlvr_multi_reward, RewardBreakdown};
use crate::sim::{
    sample_scored, sweep_k, train, PolicyParams, SimError, ToyTask, TrainConfig, TrainMode,
    TrainStats,
};
use crate::tagparse::{
    parse_with_options, validate_format, NRegime, ParseOptions, RawGeneration, TagSchema,
};
use crate::verify::{unique_count, verify_set, GoldError, GoldSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: no valid records")]
    NoRecords { path: PathBuf },
    #[error("no records with at least 2 generations; overlap needs repeated samples")]
    NoEligibleGroups,
    #[error("method '{method}' mixes single_gold and multi_gold records")]
    MixedRegime { method: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl HarnessError {
    /// CLI exit code: 1 for input errors, 2 for configuration errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Sim(_) => 2,
            _ => 1,
        }
    }
}

// ---------------------------------------------------------------------------
// Input format
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationDump {
    pub text: String,
    pub token_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DumpMode {
    Single,
    Multi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldDump {
    pub answers: Vec<String>,
    pub n_regime: NRegime,
}

/// One dumped evaluation item: K candidate answers for one prompt, from one
/// method, plus the gold set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpRecord {
    pub id: String,
    pub method: String,
    pub mode: DumpMode,
    pub calibrated: bool,
    pub k: usize,
    pub generations: Vec<GenerationDump>,
    pub gold: GoldDump,
}

impl DumpRecord {
    fn schema(&self) -> TagSchema {
        match self.mode {
            DumpMode::Single => TagSchema::single(self.calibrated, self.gold.n_regime),
            DumpMode::Multi => TagSchema::multi(self.k, self.calibrated, self.gold.n_regime)
                .expect("k validated at ingest"),
        }
    }

    fn source(&self) -> RecordSource {
        match self.mode {
            DumpMode::Single => RecordSource::SingleKSamples,
            DumpMode::Multi => RecordSource::MultiOneGeneration,
        }
    }

    fn gold_spec(&self) -> Result<GoldSpec, GoldError> {
        GoldSpec::new(self.gold.answers.iter().cloned())
    }
}

/// A rejected input line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineIssue {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub records: Vec<DumpRecord>,
    pub issues: Vec<LineIssue>,
}

/// Read a JSONL dump. Malformed or invariant-violating lines become issues;
/// the error cases are an unreadable file or zero valid records.
pub fn ingest(path: &Path) -> Result<Ingested, HarnessError> {
    let content = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Ingested::default();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: DumpRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                out.issues.push(LineIssue {
                    line: line_no,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let issue = if record.k == 0 {
            Some("k must be at least 1".to_string())
        } else if record.mode == DumpMode::Multi && record.generations.len() != 1 {
            Some(format!(
                "multi mode requires exactly 1 generation, got {}",
                record.generations.len()
            ))
        } else if record.mode == DumpMode::Single && record.generations.len() != record.k {
            Some(format!(
                "single mode requires k = {} generations, got {}",
                record.k,
                record.generations.len()
            ))
        } else if record.gold_spec().is_err() {
            Some("gold answers are empty after canonicalization".to_string())
        } else {
            None
        };
        match issue {
            Some(message) => out.issues.push(LineIssue {
                line: line_no,
                message,
            }),
            None => out.records.push(record),
        }
    }
    if out.records.is_empty() {
        return Err(HarnessError::NoRecords {
            path: path.to_path_buf(),
        });
    }
    Ok(out)
}

/// Run-wide knobs shared by the subcommands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub bins: usize,
    pub ngram_n: usize,
    pub lenient_confidence: bool,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            bins: 10,
            ngram_n: 4,
            lenient_confidence: false,
            out_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.bins == 0 {
            return Err(HarnessError::Config("--bins must be at least 1".into()));
        }
        if self.ngram_n == 0 {
            return Err(HarnessError::Config("--ngram-n must be at least 1".into()));
        }
        Ok(())
    }

    fn parse_options(&self) -> ParseOptions {
        ParseOptions {
            lenient_confidence: self.lenient_confidence,
        }
    }
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

/// One scored generation (multi-mode records produce one row, single-mode
/// records one row per sampled generation).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub id: String,
    pub gen: usize,
    pub method: String,
    pub mode: &'static str,
    pub correctness_sum: f64,
    pub brier_penalty: f64,
    pub format_multiplier: f64,
    pub total: f64,
    /// Semicolon-joined violation codes, empty when clean.
    pub violations: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreAggregate {
    pub method: String,
    pub n_rows: usize,
    pub mean_correctness_sum: f64,
    pub mean_brier_penalty: f64,
    pub gate_pass_rate: f64,
    pub mean_total: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ScoreReport {
    pub rows: Vec<ScoreRow>,
    pub aggregates: Vec<ScoreAggregate>,
}

fn score_generation(
    generation: &RawGeneration,
    schema: &TagSchema,
    gold: &GoldSpec,
    options: ParseOptions,
) -> (RewardBreakdown, String) {
    let parsed = parse_with_options(generation, schema, options);
    let verdict = validate_format(&parsed, schema);
    let correctness_sum = rlvr_multi_reward(&parsed.answers, gold);
    let brier_penalty = match (schema.calibrated, parsed.valid_confidences()) {
        (true, Some(confidences)) if confidences.len() == parsed.answers.len() => {
            let bits = verify_set(&parsed.answers, gold).bits;
            multi_brier_from_bits(&confidences, &bits)
        }
        _ => 0.0,
    };
    let breakdown = apply_format_gate(
        RewardBreakdown::ungated(correctness_sum, brier_penalty),
        &verdict,
    );
    let codes: Vec<&str> = verdict.violations.iter().map(|v| v.code()).collect();
    (breakdown, codes.join(";"))
}

/// Score every generation: tag parsing, verification, reward, format gate.
pub fn score(records: &[DumpRecord], config: &RunConfig) -> Result<ScoreReport, HarnessError> {
    config.validate()?;
    let mut report = ScoreReport::default();
    for record in records {
        let gold = record.gold_spec().expect("gold validated at ingest");
        let schema = record.schema();
        for (gen_idx, generation) in record.generations.iter().enumerate() {
            let raw = RawGeneration::new(generation.text.clone(), generation.token_count);
            let (breakdown, violations) =
                score_generation(&raw, &schema, &gold, config.parse_options());
            report.rows.push(ScoreRow {
                id: record.id.clone(),
                gen: gen_idx,
                method: record.method.clone(),
                mode: match record.mode {
                    DumpMode::Single => "single",
                    DumpMode::Multi => "multi",
                },
                correctness_sum: breakdown.correctness_sum,
                brier_penalty: breakdown.brier_penalty,
                format_multiplier: breakdown.format_multiplier,
                total: breakdown.total,
                violations,
            });
        }
    }
    // Aggregate per method, in first-seen order.
    let mut methods: Vec<String> = Vec::new();
    for row in &report.rows {
        if !methods.contains(&row.method) {
            methods.push(row.method.clone());
        }
    }
    for method in methods {
        let rows: Vec<&ScoreRow> = report.rows.iter().filter(|r| r.method == method).collect();
        let n = rows.len() as f64;
        report.aggregates.push(ScoreAggregate {
            method,
            n_rows: rows.len(),
            mean_correctness_sum: rows.iter().map(|r| r.correctness_sum).sum::<f64>() / n,
            mean_brier_penalty: rows.iter().map(|r| r.brier_penalty).sum::<f64>() / n,
            gate_pass_rate: rows.iter().map(|r| r.format_multiplier).sum::<f64>() / n,
            mean_total: rows.iter().map(|r| r.total).sum::<f64>() / n,
        });
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

/// Per-record evaluation row; every group aggregate is recomputable from
/// these rows (bits and confidences are semicolon-joined per slot).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRecordRow {
    pub method: String,
    pub source: &'static str,
    pub id: String,
    pub k: usize,
    pub bits: String,
    pub confidences: String,
    pub token_total: u64,
    pub unique_count: usize,
    pub selected_index: usize,
    pub invalid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalGroup {
    pub method: String,
    pub source: RecordSource,
    pub n_regime: NRegime,
    pub report: MetricsReport,
    /// Reliability curves keyed "top1" / "pooled" / "set"; absent for
    /// uncalibrated groups.
    pub curves: BTreeMap<&'static str, Vec<CalibrationBin>>,
}

#[derive(Debug, Clone, Default)]
pub struct EvalReport {
    pub rows: Vec<EvalRecordRow>,
    pub groups: Vec<EvalGroup>,
    /// Non-fatal notes, e.g. groups whose calibration fields were omitted.
    pub warnings: Vec<String>,
}

/// A dump record turned into an evaluation set. Generations that fail to
/// parse enter the metrics as all-wrong with confidence 0 rather than being
/// dropped (dropping would inflate accuracy); `invalid` marks them.
fn build_set_record(record: &DumpRecord, options: ParseOptions) -> (SetRecord, bool) {
    let schema = record.schema();
    let gold = record.gold_spec().expect("gold validated at ingest");
    let mut invalid = false;
    let (answers, confidences, token_total) = match record.mode {
        DumpMode::Multi => {
            let generation = &record.generations[0];
            let raw = RawGeneration::new(generation.text.clone(), generation.token_count);
            let parsed = parse_with_options(&raw, &schema, options);
            if parsed.is_well_formed() {
                let confidences = record.calibrated.then(|| {
                    parsed
                        .valid_confidences()
                        .expect("well-formed calibrated parse")
                });
                (parsed.answers, confidences, generation.token_count)
            } else {
                invalid = true;
                (
                    vec![String::new(); record.k],
                    record.calibrated.then(|| vec![0.0; record.k]),
                    generation.token_count,
                )
            }
        }
        DumpMode::Single => {
            let mut answers = Vec::with_capacity(record.k);
            let mut confidences = record.calibrated.then(Vec::new);
            let mut token_total = 0;
            for generation in &record.generations {
                token_total += generation.token_count;
                let raw = RawGeneration::new(generation.text.clone(), generation.token_count);
                let parsed = parse_with_options(&raw, &schema, options);
                if parsed.is_well_formed() {
                    answers.push(parsed.answers[0].clone());
                    if let Some(confs) = confidences.as_mut() {
                        confs.push(parsed.valid_confidences().expect("well-formed")[0]);
                    }
                } else {
                    invalid = true;
                    answers.push(String::new());
                    if let Some(confs) = confidences.as_mut() {
                        confs.push(0.0);
                    }
                }
            }
            (answers, confidences, token_total)
        }
    };
    let correctness = verify_set(&answers, &gold);
    let set_record = SetRecord::new(
        record.id.clone(),
        answers,
        confidences,
        correctness,
        token_total,
        record.source(),
    )
    .expect("aligned by construction");
    (set_record, invalid)
}

/// Build per-source reports for every method, plus the per-record rows they
/// are computed from.
pub fn evaluate(records: &[DumpRecord], config: &RunConfig) -> Result<EvalReport, HarnessError> {
    config.validate()?;
    let mut report = EvalReport::default();
    // Group keys in first-seen order for stable output.
    let mut keys: Vec<(String, RecordSource)> = Vec::new();
    for record in records {
        let key = (record.method.clone(), record.source());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    for (method, source) in keys {
        let group: Vec<&DumpRecord> = records
            .iter()
            .filter(|r| r.method == method && r.source() == source)
            .collect();
        let n_regime = group[0].gold.n_regime;
        if group.iter().any(|r| r.gold.n_regime != n_regime) {
            return Err(HarnessError::MixedRegime { method });
        }
        let mut set_records = Vec::with_capacity(group.len());
        let mut invalid_flags = Vec::with_capacity(group.len());
        for record in &group {
            let (set_record, invalid) = build_set_record(record, config.parse_options());
            set_records.push(set_record);
            invalid_flags.push(invalid);
        }
        let n_invalid = invalid_flags.iter().filter(|v| **v).count();

        let metrics = compute_report(&set_records, n_regime, config.bins, config.seed, n_invalid)?;
        let curves = if set_records.iter().all(|r| r.confidences.is_some()) {
            report_curves(&set_records, n_regime, config.bins, config.seed)?
        } else {
            report.warnings.push(format!(
                "{method} [{}]: no confidences; calibration fields omitted",
                source.label()
            ));
            BTreeMap::new()
        };

        let rule = match source {
            RecordSource::MultiOneGeneration => calib::SelectionRule::First,
            RecordSource::SingleKSamples => calib::SelectionRule::UniformRandom,
        };
        let indices = calib::selection_indices(&set_records, rule, config.seed);
        for ((set_record, invalid), selected_index) in
            set_records.iter().zip(invalid_flags).zip(indices)
        {
            report.rows.push(EvalRecordRow {
                method: method.clone(),
                source: source.label(),
                id: set_record.id.clone(),
                k: set_record.k(),
                bits: set_record
                    .correctness
                    .bits
                    .iter()
                    .map(|b| if *b { '1' } else { '0' })
                    .collect(),
                confidences: set_record
                    .confidences
                    .as_ref()
                    .map(|confs| {
                        confs
                            .iter()
                            .map(f64::to_string)
                            .collect::<Vec<_>>()
                            .join(";")
                    })
                    .unwrap_or_default(),
                token_total: set_record.token_total,
                unique_count: unique_count(&set_record.answers, crate::tagparse::canonicalize),
                selected_index,
                invalid,
            });
        }
        report.groups.push(EvalGroup {
            method,
            source,
            n_regime,
            report: metrics,
            curves,
        });
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// overlap
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapRow {
    pub method: String,
    pub id: String,
    pub n_generations: usize,
    pub overlap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapAggregate {
    pub method: String,
    pub n_rows: usize,
    pub mean_overlap: f64,
}

#[derive(Debug, Clone, Default)]
pub struct OverlapReport {
    pub rows: Vec<OverlapRow>,
    pub aggregates: Vec<OverlapAggregate>,
}

/// N-gram overlap across each record's repeated generations (single-mode
/// records with k >= 2). Quantifies how much reasoning text independent
/// samples re-instantiate.
pub fn overlap(records: &[DumpRecord], config: &RunConfig) -> Result<OverlapReport, HarnessError> {
    config.validate()?;
    let mut report = OverlapReport::default();
    for record in records {
        if record.generations.len() < 2 {
            continue;
        }
        let texts: Vec<&str> = record.generations.iter().map(|g| g.text.as_str()).collect();
        let value = calib::ngram_overlap(&texts, config.ngram_n)?;
        report.rows.push(OverlapRow {
            method: record.method.clone(),
            id: record.id.clone(),
            n_generations: texts.len(),
            overlap: value,
        });
    }
    if report.rows.is_empty() {
        return Err(HarnessError::NoEligibleGroups);
    }
    let mut methods: Vec<String> = Vec::new();
    for row in &report.rows {
        if !methods.contains(&row.method) {
            methods.push(row.method.clone());
        }
    }
    for method in methods {
        let rows: Vec<&OverlapRow> = report.rows.iter().filter(|r| r.method == method).collect();
        report.aggregates.push(OverlapAggregate {
            method,
            n_rows: rows.len(),
            mean_overlap: rows.iter().map(|r| r.overlap).sum::<f64>() / rows.len() as f64,
        });
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn default_group_size() -> usize {
    32
}
fn default_temperature() -> f64 {
    0.7
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_steps() -> usize {
    500
}
fn default_eval_sets() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
pub struct NoiseEntry {
    pub id: usize,
    pub p: f64,
}

/// One experiment in a simulate config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    /// Train a single-answer policy and a k-answer policy on the same task;
    /// contrast answer collapse with set coverage.
    CollapseVsMulti {
        name: Option<String>,
        vocab_size: usize,
        gold_ids: Vec<usize>,
        k: usize,
        #[serde(default = "default_steps")]
        steps: usize,
        #[serde(default = "default_group_size")]
        group_size: usize,
        #[serde(default = "default_temperature")]
        temperature: f64,
        #[serde(default = "default_learning_rate")]
        learning_rate: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_eval_sets")]
        eval_sets: usize,
    },
    /// Train one coverage-reward policy per k and tabulate final diversity.
    KSweep {
        name: Option<String>,
        vocab_size: usize,
        gold_ids: Vec<usize>,
        k_values: Vec<usize>,
        #[serde(default = "default_steps")]
        steps: usize,
        #[serde(default = "default_group_size")]
        group_size: usize,
        #[serde(default = "default_temperature")]
        temperature: f64,
        #[serde(default = "default_learning_rate")]
        learning_rate: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_eval_sets")]
        eval_sets: usize,
    },
    /// Train a calibrated multi-answer policy on stochastic correctness and
    /// report the learned confidences against the true probabilities.
    CalibrationConvergence {
        name: Option<String>,
        vocab_size: usize,
        gold_ids: Vec<usize>,
        noise: Vec<NoiseEntry>,
        k: usize,
        mode: TrainMode,
        #[serde(default = "default_steps")]
        steps: usize,
        #[serde(default = "default_group_size")]
        group_size: usize,
        #[serde(default = "default_temperature")]
        temperature: f64,
        #[serde(default = "default_learning_rate")]
        learning_rate: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_eval_sets")]
        eval_sets: usize,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub experiments: Vec<ExperimentSpec>,
}

/// Files written for one experiment.
#[derive(Debug, Clone, Default)]
pub struct SimulateOutput {
    pub written: Vec<PathBuf>,
}

fn eval_set_records(
    task: &ToyTask,
    policy: &PolicyParams,
    config: &TrainConfig,
    n_sets: usize,
    seed: u64,
) -> Result<Vec<SetRecord>, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let source = if config.mode.is_multi() {
        RecordSource::MultiOneGeneration
    } else {
        RecordSource::SingleKSamples
    };
    let mut records = Vec::with_capacity(n_sets);
    for i in 0..n_sets {
        let sample = sample_scored(task, policy, config, &mut rng)?;
        let answers: Vec<String> = sample
            .set
            .answer_ids
            .iter()
            .map(|id| ToyTask::label(*id))
            .collect();
        records.push(
            SetRecord::new(
                format!("set{i}"),
                answers,
                config
                    .mode
                    .calibrated()
                    .then(|| sample.set.confidences.clone()),
                crate::verify::CorrectnessVector {
                    bits: sample.bits.clone(),
                },
                0,
                source,
            )
            .expect("aligned by construction"),
        );
    }
    Ok(records)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    write_bytes(path, &bytes)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| HarnessError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    let mut file = fs::File::create(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(bytes).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Serialize)]
struct StatsRow {
    step: usize,
    mean_reward: f64,
    coverage_mean: f64,
    unique_correct: f64,
    entropy: f64,
    mean_brier: String,
}

fn write_stats(path: &Path, stats: &TrainStats) -> Result<(), HarnessError> {
    let rows: Vec<StatsRow> = (0..stats.steps())
        .map(|step| StatsRow {
            step,
            mean_reward: stats.mean_reward[step],
            coverage_mean: stats.coverage_mean[step],
            unique_correct: stats.unique_correct[step],
            entropy: stats.policy_entropy[step],
            mean_brier: stats
                .mean_brier
                .as_ref()
                .map(|s| s[step].to_string())
                .unwrap_or_default(),
        })
        .collect();
    write_csv(path, &rows)
}

fn opt_str(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// The MetricsReport fields in their documented column order.
#[derive(Debug, Serialize)]
struct MetricsColumns {
    coverage_mean: f64,
    correct_count: f64,
    pass1: f64,
    pass_at_k: f64,
    uniqueness_mean: f64,
    avg_token_total: f64,
    brier_top1: String,
    brier_pooled: String,
    ece_top1: String,
    ece_pooled: String,
    set_ece: String,
    n_records: usize,
    n_invalid: usize,
}

impl From<&MetricsReport> for MetricsColumns {
    fn from(r: &MetricsReport) -> Self {
        Self {
            coverage_mean: r.coverage_mean,
            correct_count: r.correct_count,
            pass1: r.pass1,
            pass_at_k: r.pass_at_k,
            uniqueness_mean: r.uniqueness_mean,
            avg_token_total: r.avg_token_total,
            brier_top1: opt_str(r.brier_top1),
            brier_pooled: opt_str(r.brier_pooled),
            ece_top1: opt_str(r.ece_top1),
            ece_pooled: opt_str(r.ece_pooled),
            set_ece: opt_str(r.set_ece),
            n_records: r.n_records,
            n_invalid: r.n_invalid,
        }
    }
}

#[derive(Debug, Serialize)]
struct SimMetricsRow<'a> {
    name: &'a str,
    arm: &'a str,
    source: &'a str,
    coverage_mean: f64,
    correct_count: f64,
    pass1: f64,
    pass_at_k: f64,
    uniqueness_mean: f64,
    avg_token_total: f64,
    brier_top1: String,
    brier_pooled: String,
    ece_top1: String,
    ece_pooled: String,
    set_ece: String,
    n_records: usize,
    n_invalid: usize,
}

fn write_metrics_row(
    out: &mut Vec<u8>,
    name: &str,
    arm: &str,
    records: &[SetRecord],
    n_regime: NRegime,
) -> Result<(), HarnessError> {
    let report = compute_report(records, n_regime, 10, 0, 0)?;
    let columns = MetricsColumns::from(&report);
    let mut writer = csv::WriterBuilder::new()
        .has_headers(out.is_empty())
        .from_writer(Vec::new());
    writer
        .serialize(SimMetricsRow {
            name,
            arm,
            source: records[0].source.label(),
            coverage_mean: columns.coverage_mean,
            correct_count: columns.correct_count,
            pass1: columns.pass1,
            pass_at_k: columns.pass_at_k,
            uniqueness_mean: columns.uniqueness_mean,
            avg_token_total: columns.avg_token_total,
            brier_top1: columns.brier_top1,
            brier_pooled: columns.brier_pooled,
            ece_top1: columns.ece_top1,
            ece_pooled: columns.ece_pooled,
            set_ece: columns.set_ece,
            n_records: columns.n_records,
            n_invalid: columns.n_invalid,
        })
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    out.extend(
        writer
            .into_inner()
            .map_err(|e| HarnessError::Config(e.to_string()))?,
    );
    Ok(())
}

/// Run every experiment in a config file and write TrainStats series plus
/// final metrics reports under `config.out_dir`.
pub fn simulate(config_path: &Path, config: &RunConfig) -> Result<SimulateOutput, HarnessError> {
    config.validate()?;
    let content = fs::read_to_string(config_path).map_err(|source| HarnessError::Io {
        path: config_path.to_path_buf(),
        source,
    })?;
    let experiments: SimulateConfig =
        serde_json::from_str(&content).map_err(|e| HarnessError::Config(e.to_string()))?;
    if experiments.experiments.is_empty() {
        return Err(HarnessError::Config("no experiments in config".into()));
    }

    let mut output = SimulateOutput::default();
    let out = &config.out_dir;
    let record = |output: &mut SimulateOutput, path: PathBuf| output.written.push(path);

    for experiment in &experiments.experiments {
        match experiment {
            ExperimentSpec::CollapseVsMulti {
                name,
                vocab_size,
                gold_ids,
                k,
                steps,
                group_size,
                temperature,
                learning_rate,
                seed,
                eval_sets,
            } => {
                let name = name.as_deref().unwrap_or("collapse_vs_multi");
                let task = ToyTask::new(*vocab_size, gold_ids.iter().copied())?;
                let mut metrics_bytes = Vec::new();
                let mut summary_rows = Vec::new();
                for (arm, mode, arm_k) in [
                    ("single", TrainMode::RlvrSingle, 1usize),
                    ("multi", TrainMode::RlvrMulti, *k),
                ] {
                    let train_config = TrainConfig {
                        k: arm_k,
                        group_size: *group_size,
                        temperature: *temperature,
                        learning_rate: *learning_rate,
                        steps: *steps,
                        mode,
                        seed: *seed,
                    };
                    let (policy, stats) = train(&task, &train_config)?;
                    let stats_path = out.join(format!("{name}_{arm}_stats.csv"));
                    write_stats(&stats_path, &stats)?;
                    record(&mut output, stats_path);

                    let sets = eval_set_records(
                        &task,
                        &policy,
                        &train_config,
                        *eval_sets,
                        seed.wrapping_add(0xe7a1),
                    )?;
                    write_metrics_row(&mut metrics_bytes, name, arm, &sets, task.n_regime())?;
                    let distinct: std::collections::BTreeSet<&String> =
                        sets.iter().flat_map(|r| r.answers.iter()).collect();
                    let (coverage_mean, correct_count) = calib::coverage(&sets)?;
                    summary_rows.push(CollapseSummaryRow {
                        arm,
                        k: arm_k,
                        eval_sets: *eval_sets,
                        distinct_answers: distinct.len(),
                        coverage_mean,
                        unique_correct: correct_count,
                    });
                }
                let summary_path = out.join(format!("{name}_summary.csv"));
                write_csv(&summary_path, &summary_rows)?;
                record(&mut output, summary_path);
                let metrics_path = out.join(format!("{name}_metrics.csv"));
                write_bytes(&metrics_path, &metrics_bytes)?;
                record(&mut output, metrics_path);
            }
            ExperimentSpec::KSweep {
                name,
                vocab_size,
                gold_ids,
                k_values,
                steps,
                group_size,
                temperature,
                learning_rate,
                seed,
                eval_sets,
            } => {
                let name = name.as_deref().unwrap_or("k_sweep");
                let task = ToyTask::new(*vocab_size, gold_ids.iter().copied())?;
                let base = TrainConfig {
                    k: k_values.first().copied().unwrap_or(1),
                    group_size: *group_size,
                    temperature: *temperature,
                    learning_rate: *learning_rate,
                    steps: *steps,
                    mode: TrainMode::RlvrMulti,
                    seed: *seed,
                };
                let cells = sweep_k(&task, &base, k_values, *eval_sets)?;
                for (cell, stats) in &cells {
                    let stats_path = out.join(format!("{name}_k{}_stats.csv", cell.k));
                    write_stats(&stats_path, stats)?;
                    record(&mut output, stats_path);
                }
                let summary_path = out.join(format!("{name}_summary.csv"));
                let rows: Vec<&crate::sim::SweepCell> = cells.iter().map(|(c, _)| c).collect();
                write_csv(&summary_path, &rows)?;
                record(&mut output, summary_path);
            }
            ExperimentSpec::CalibrationConvergence {
                name,
                vocab_size,
                gold_ids,
                noise,
                k,
                mode,
                steps,
                group_size,
                temperature,
                learning_rate,
                seed,
                eval_sets,
            } => {
                let name = name.as_deref().unwrap_or("calibration_convergence");
                if !mode.calibrated() {
                    return Err(HarnessError::Config(format!(
                        "experiment '{name}' needs a calibrated mode"
                    )));
                }
                let task = ToyTask::new(*vocab_size, gold_ids.iter().copied())?
                    .with_noise(noise.iter().map(|n| (n.id, n.p)))?;
                let train_config = TrainConfig {
                    k: *k,
                    group_size: *group_size,
                    temperature: *temperature,
                    learning_rate: *learning_rate,
                    steps: *steps,
                    mode: *mode,
                    seed: *seed,
                };
                let (policy, stats) = train(&task, &train_config)?;
                let stats_path = out.join(format!("{name}_stats.csv"));
                write_stats(&stats_path, &stats)?;
                record(&mut output, stats_path);

                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0xca1b));
                let summary = crate::sim::evaluate_policy(
                    &task,
                    &policy,
                    &train_config,
                    *eval_sets,
                    &mut rng,
                )?;
                let rows: Vec<ConfidenceRow> = summary
                    .confidence_totals
                    .iter()
                    .map(|(id, (sum, count))| ConfidenceRow {
                        answer_id: *id,
                        true_p: task
                            .noise
                            .get(id)
                            .copied()
                            .unwrap_or(if task.gold_ids.contains(id) { 1.0 } else { 0.0 }),
                        mean_confidence: sum / *count as f64,
                        n_samples: *count,
                        mean_brier: summary.mean_brier.unwrap_or(f64::NAN),
                    })
                    .collect();
                let summary_path = out.join(format!("{name}_summary.csv"));
                write_csv(&summary_path, &rows)?;
                record(&mut output, summary_path);

                let sets = eval_set_records(
                    &task,
                    &policy,
                    &train_config,
                    *eval_sets,
                    seed.wrapping_add(0xe7a1),
                )?;
                let mut metrics_bytes = Vec::new();
                write_metrics_row(&mut metrics_bytes, name, "trained", &sets, task.n_regime())?;
                let metrics_path = out.join(format!("{name}_metrics.csv"));
                write_bytes(&metrics_path, &metrics_bytes)?;
                record(&mut output, metrics_path);
            }
        }
    }
    Ok(output)
}

#[derive(Debug, Serialize)]
struct CollapseSummaryRow {
    arm: &'static str,
    k: usize,
    eval_sets: usize,
    distinct_answers: usize,
    coverage_mean: f64,
    unique_correct: f64,
}

#[derive(Debug, Serialize)]
struct ConfidenceRow {
    answer_id: usize,
    true_p: f64,
    mean_confidence: f64,
    n_samples: usize,
    mean_brier: f64,
}

// ---------------------------------------------------------------------------
// Report writers
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct GroupMetricsRow<'a> {
    method: &'a str,
    source: &'a str,
    n_regime: &'a str,
    coverage_mean: f64,
    correct_count: f64,
    pass1: f64,
    pass_at_k: f64,
    uniqueness_mean: f64,
    avg_token_total: f64,
    brier_top1: String,
    brier_pooled: String,
    ece_top1: String,
    ece_pooled: String,
    set_ece: String,
    n_records: usize,
    n_invalid: usize,
}

#[derive(Debug, Serialize)]
struct CurveRow<'a> {
    method: &'a str,
    source: &'a str,
    curve: &'a str,
    bin_lo: f64,
    bin_hi: f64,
    count: usize,
    mean_conf: String,
    mean_acc: String,
}

/// Write `metrics.csv`, `records.csv`, and `curves.csv` under `out_dir`.
/// Empty reliability bins are omitted from the curve file.
pub fn write_eval_report(
    report: &EvalReport,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    let metrics_rows: Vec<GroupMetricsRow> = report
        .groups
        .iter()
        .map(|g| {
            let columns = MetricsColumns::from(&g.report);
            GroupMetricsRow {
                method: &g.method,
                source: g.source.label(),
                n_regime: match g.n_regime {
                    NRegime::SingleGold => "single_gold",
                    NRegime::MultiGold => "multi_gold",
                },
                coverage_mean: columns.coverage_mean,
                correct_count: columns.correct_count,
                pass1: columns.pass1,
                pass_at_k: columns.pass_at_k,
                uniqueness_mean: columns.uniqueness_mean,
                avg_token_total: columns.avg_token_total,
                brier_top1: columns.brier_top1,
                brier_pooled: columns.brier_pooled,
                ece_top1: columns.ece_top1,
                ece_pooled: columns.ece_pooled,
                set_ece: columns.set_ece,
                n_records: columns.n_records,
                n_invalid: columns.n_invalid,
            }
        })
        .collect();
    let metrics_path = out_dir.join("metrics.csv");
    write_csv(&metrics_path, &metrics_rows)?;

    let records_path = out_dir.join("records.csv");
    write_csv(&records_path, &report.rows)?;

    let mut curve_rows = Vec::new();
    for group in &report.groups {
        for (kind, bins) in &group.curves {
            for bin in bins.iter().filter(|b| b.count > 0) {
                curve_rows.push(CurveRow {
                    method: &group.method,
                    source: group.source.label(),
                    curve: kind,
                    bin_lo: bin.lo,
                    bin_hi: bin.hi,
                    count: bin.count,
                    mean_conf: bin.mean_conf.map(|v| v.to_string()).unwrap_or_default(),
                    mean_acc: bin.mean_acc.map(|v| v.to_string()).unwrap_or_default(),
                });
            }
        }
    }
    let curves_path = out_dir.join("curves.csv");
    write_csv(&curves_path, &curve_rows)?;
    Ok(vec![metrics_path, records_path, curves_path])
}

/// Write `scores.csv` and `score_summary.csv` under `out_dir`.
pub fn write_score_report(
    report: &ScoreReport,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    let scores_path = out_dir.join("scores.csv");
    write_csv(&scores_path, &report.rows)?;
    let summary_path = out_dir.join("score_summary.csv");
    write_csv(&summary_path, &report.aggregates)?;
    Ok(vec![scores_path, summary_path])
}

/// Write `overlap.csv` and `overlap_summary.csv` under `out_dir`.
pub fn write_overlap_report(
    report: &OverlapReport,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    let rows_path = out_dir.join("overlap.csv");
    write_csv(&rows_path, &report.rows)?;
    let summary_path = out_dir.join("overlap_summary.csv");
    write_csv(&summary_path, &report.aggregates)?;
    Ok(vec![rows_path, summary_path])
}

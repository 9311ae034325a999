//! Rewards, metrics, and a desk-scale trainer for set-valued generation.
//!
//! Models that emit a *set* of candidate answers (optionally with a verbalized
//! confidence per candidate) need different machinery than single-answer
//! pipelines: structured tag parsing, set-level verifiable rewards with a
//! format gate, coverage/diversity/calibration metrics, and training dynamics
//! that reward distributions instead of modes. This crate provides that
//! machinery end to end:
//!
//! - [`tagparse`] — total parser for the `<think>` / `<answer{i}>` /
//!   `<confidence{i}>` output grammar, plus answer canonicalization and the
//!   format verdict (uniqueness and confidence-sum rules).
//! - [`verify`] — canonicalized exact-match verification of candidates
//!   against a gold answer set, with a pluggable matcher boundary.
//! - [`reward`] — binary, set-level, and calibration-aware reward functions
//!   and the multiplicative format gate.
//! - [`calib`] — coverage, pass@1/pass@k, uniqueness, token efficiency,
//!   Brier/ECE/set-ECE, reliability curves, and n-gram overlap.
//! - [`sim`] — a tabular-policy GRPO trainer on synthetic multi-answer tasks
//!   (Plackett–Luce set sampling, mean-baseline advantages, closed-form
//!   score-function gradients).
//! - [`harness`] — JSONL dump ingestion, scoring/evaluation/overlap runners,
//!   simulator experiment runner, and deterministic CSV report writers.
//!
//! The `examples/` directory has one runnable program per capability; the
//! `answerset` binary exposes the same runners as CLI subcommands.

pub mod calib;
pub mod harness;
pub mod reward;
pub mod sim;
pub mod tagparse;
pub mod verify;

pub use calib::{MetricsReport, RecordSource, SetRecord};
pub use reward::RewardBreakdown;
pub use tagparse::{
    canonicalize, parse, validate_format, AnswerMode, FormatVerdict, NRegime, ParsedOutput,
    RawGeneration, TagSchema, Violation,
};
pub use verify::{exact_match, verify_set, CorrectnessVector, GoldSpec};

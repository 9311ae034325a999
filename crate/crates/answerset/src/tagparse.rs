//! Parsing and validation of the structured output grammar.
//!
//! Generations are expected to follow one of four tag layouts:
//!
//! ```text
//! single, uncalibrated:  <think>..</think><answer>..</answer>
//! single, calibrated:    <think>..</think><answer>..</answer>
//!                        [<analysis>..</analysis>]<confidence>..</confidence>
//! multi,  uncalibrated:  <think>..</think><answer1>..</answer1> .. <answerK>..</answerK>
//! multi,  calibrated:    <think>..</think><answer1>..</answer1><confidence1>..</confidence1> ..
//! ```
//!
//! [`parse`] is total: arbitrary input always yields a [`ParsedOutput`], with
//! every defect recorded as a [`Violation`] code. Tag names are matched
//! case-sensitively; whitespace around tag contents is tolerated and trimmed.
//! [`validate_format`] layers the set-level rules on top of a parse: answers
//! must be pairwise distinct under [`canonicalize`], and in the calibrated
//! single-gold regime the confidences must sum to at most one.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the confidence-sum rule, so that parsed decimals such as
/// 0.40 + 0.30 + 0.30 pass exactly.
pub const CONF_SUM_EPSILON: f64 = 1e-9;

/// One raw generation as produced by some upstream system.
///
/// `token_count` is carried opaquely (it is whatever the producer reported)
/// and `text` is never mutated by the parser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawGeneration {
    pub text: String,
    pub token_count: u64,
}

impl RawGeneration {
    pub fn new(text: impl Into<String>, token_count: u64) -> Self {
        Self {
            text: text.into(),
            token_count,
        }
    }
}

/// Whether a schema expects one `<answer>` tag or indexed `<answer{i}>` tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerMode {
    Single,
    Multi,
}

/// Whether the dataset assigns one gold answer (N = 1) or several (N > 1).
///
/// The confidence-sum constraint only applies under [`NRegime::SingleGold`]:
/// with a single gold answer the per-candidate confidences form a
/// distribution and must sum to at most one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NRegime {
    SingleGold,
    MultiGold,
}

/// Schema mismatch at construction time.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("single answer mode requires k = 1, got k = {0}")]
    SingleNeedsKOne(usize),
}

/// The expected shape of a generation: answer mode, calibration, candidate
/// count, and gold regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSchema {
    pub answer_mode: AnswerMode,
    pub calibrated: bool,
    pub k: usize,
    pub n_regime: NRegime,
}

impl TagSchema {
    pub fn new(
        answer_mode: AnswerMode,
        calibrated: bool,
        k: usize,
        n_regime: NRegime,
    ) -> Result<Self, SchemaError> {
        if k == 0 {
            return Err(SchemaError::ZeroK);
        }
        if answer_mode == AnswerMode::Single && k != 1 {
            return Err(SchemaError::SingleNeedsKOne(k));
        }
        Ok(Self {
            answer_mode,
            calibrated,
            k,
            n_regime,
        })
    }

    /// Single-answer schema (k = 1).
    pub fn single(calibrated: bool, n_regime: NRegime) -> Self {
        Self {
            answer_mode: AnswerMode::Single,
            calibrated,
            k: 1,
            n_regime,
        }
    }

    /// Multi-answer schema expecting exactly `k` candidates.
    pub fn multi(k: usize, calibrated: bool, n_regime: NRegime) -> Result<Self, SchemaError> {
        Self::new(AnswerMode::Multi, calibrated, k, n_regime)
    }
}

/// Defect codes recorded by [`parse`] and [`validate_format`].
///
/// Serialized under the stable identifiers listed in [`Violation::code`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Violation {
    MissingTag,
    TagOrder,
    WrongCount,
    ConfNotNumeric,
    ConfOutOfRange,
    ConfSumExceedsOne,
    DuplicateAnswer,
    TrailingContent,
    MissingThink,
}

impl Violation {
    /// Stable text identifier used in reports.
    pub fn code(&self) -> &'static str {
        match self {
            Violation::MissingTag => "MISSING_TAG",
            Violation::TagOrder => "TAG_ORDER",
            Violation::WrongCount => "WRONG_COUNT",
            Violation::ConfNotNumeric => "CONF_NOT_NUMERIC",
            Violation::ConfOutOfRange => "CONF_OUT_OF_RANGE",
            Violation::ConfSumExceedsOne => "CONF_SUM_EXCEEDS_ONE",
            Violation::DuplicateAnswer => "DUPLICATE_ANSWER",
            Violation::TrailingContent => "TRAILING_CONTENT",
            Violation::MissingThink => "MISSING_THINK",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Violation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "MISSING_TAG" => Ok(Violation::MissingTag),
            "TAG_ORDER" => Ok(Violation::TagOrder),
            "WRONG_COUNT" => Ok(Violation::WrongCount),
            "CONF_NOT_NUMERIC" => Ok(Violation::ConfNotNumeric),
            "CONF_OUT_OF_RANGE" => Ok(Violation::ConfOutOfRange),
            "CONF_SUM_EXCEEDS_ONE" => Ok(Violation::ConfSumExceedsOne),
            "DUPLICATE_ANSWER" => Ok(Violation::DuplicateAnswer),
            "TRAILING_CONTENT" => Ok(Violation::TrailingContent),
            "MISSING_THINK" => Ok(Violation::MissingThink),
            other => Err(format!("unknown violation code: {other}")),
        }
    }
}

impl Serialize for Violation {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Violation {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The structured decomposition of one generation.
///
/// `answers` preserves document order (the top-1 selection rule depends on
/// it). `confidences` is present iff the schema is calibrated; a `None` slot
/// marks a confidence that was missing, non-numeric, or out of range.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParsedOutput {
    pub think: Option<String>,
    pub answers: Vec<String>,
    pub confidences: Option<Vec<Option<f64>>>,
    pub analysis: Option<String>,
    pub violations: Vec<Violation>,
    /// Non-fatal notes, e.g. a percentage confidence rescaled in lenient mode.
    pub warnings: Vec<String>,
}

impl ParsedOutput {
    /// True when parsing found no defects.
    pub fn is_well_formed(&self) -> bool {
        self.violations.is_empty()
    }

    /// The confidences as plain values, if calibrated and every slot is valid.
    pub fn valid_confidences(&self) -> Option<Vec<f64>> {
        self.confidences
            .as_ref()
            .and_then(|slots| slots.iter().copied().collect::<Option<Vec<f64>>>())
    }
}

/// Parser knobs beyond the schema itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Rescale confidences in (1, 100] by 1/100 (recording a warning) instead
    /// of flagging them out of range. Real dumps contain percentages.
    pub lenient_confidence: bool,
}

/// Verdict of the format gate: `ok` iff `violations` is empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatVerdict {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

// ---------------------------------------------------------------------------
// Tag scanning
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TagName {
    Think,
    Analysis,
    /// `None` for the unindexed `<answer>` form.
    Answer(Option<usize>),
    Confidence(Option<usize>),
}

#[derive(Debug)]
struct TagToken {
    start: usize,
    end: usize,
    name: TagName,
    closing: bool,
}

#[derive(Debug)]
struct Region {
    name: TagName,
    content: String,
    start: usize,
    end: usize,
}

fn parse_tag_name(name: &str) -> Option<TagName> {
    match name {
        "think" => return Some(TagName::Think),
        "analysis" => return Some(TagName::Analysis),
        "answer" => return Some(TagName::Answer(None)),
        "confidence" => return Some(TagName::Confidence(None)),
        _ => {}
    }
    if let Some(digits) = name.strip_prefix("answer") {
        return digits
            .parse::<usize>()
            .ok()
            .map(|i| TagName::Answer(Some(i)));
    }
    if let Some(digits) = name.strip_prefix("confidence") {
        return digits
            .parse::<usize>()
            .ok()
            .map(|i| TagName::Confidence(Some(i)));
    }
    None
}

/// Collect every recognized `<name>` / `</name>` token in document order.
fn scan_tokens(text: &str) -> Vec<TagToken> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'<' {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        let closing = j < bytes.len() && bytes[j] == b'/';
        if closing {
            j += 1;
        }
        let name_start = j;
        while j < bytes.len() && (bytes[j].is_ascii_lowercase() || bytes[j].is_ascii_digit()) {
            j += 1;
        }
        if j < bytes.len() && bytes[j] == b'>' && j > name_start {
            if let Some(name) = parse_tag_name(&text[name_start..j]) {
                tokens.push(TagToken {
                    start: i,
                    end: j + 1,
                    name,
                    closing,
                });
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    tokens
}

/// Pair open/close tokens greedily. A region's content is everything between
/// its open and the next close of the same name; other tag tokens inside are
/// swallowed as content (tag contents are opaque). Unmatched tokens are
/// skipped.
fn scan_regions(text: &str) -> Vec<Region> {
    let tokens = scan_tokens(text);
    let mut regions = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i].closing {
            i += 1;
            continue;
        }
        match tokens[i + 1..]
            .iter()
            .position(|t| t.closing && t.name == tokens[i].name)
        {
            Some(offset) => {
                let j = i + 1 + offset;
                regions.push(Region {
                    name: tokens[i].name,
                    content: text[tokens[i].end..tokens[j].start].trim().to_string(),
                    start: tokens[i].start,
                    end: tokens[j].end,
                });
                i = j + 1;
            }
            None => i += 1,
        }
    }
    regions
}

// ---------------------------------------------------------------------------
// parse
// ---------------------------------------------------------------------------

/// Parse one generation against a schema. Total: never fails, all defects are
/// recorded in the returned [`ParsedOutput::violations`].
pub fn parse(raw: &RawGeneration, schema: &TagSchema) -> ParsedOutput {
    parse_with_options(raw, schema, ParseOptions::default())
}

/// [`parse`] with explicit [`ParseOptions`].
pub fn parse_with_options(
    raw: &RawGeneration,
    schema: &TagSchema,
    options: ParseOptions,
) -> ParsedOutput {
    let regions = scan_regions(&raw.text);
    let mut out = ParsedOutput::default();
    let push = |violations: &mut Vec<Violation>, v: Violation| {
        if !violations.contains(&v) {
            violations.push(v);
        }
    };
    let mut violations = Vec::new();

    // <think> must exist and precede everything else; its absence does not
    // block answer extraction.
    let think = regions.iter().find(|r| r.name == TagName::Think);
    match think {
        Some(r) => {
            out.think = Some(r.content.clone());
            if regions
                .iter()
                .any(|o| !matches!(o.name, TagName::Think) && o.start < r.start)
            {
                push(&mut violations, Violation::TagOrder);
            }
        }
        None => push(&mut violations, Violation::MissingThink),
    }

    out.analysis = regions
        .iter()
        .find(|r| r.name == TagName::Analysis)
        .map(|r| r.content.clone());

    // Answers, in document order.
    let answers: Vec<&Region> = regions
        .iter()
        .filter(|r| {
            matches!(r.name, TagName::Answer(idx)
            if idx.is_none() == (schema.answer_mode == AnswerMode::Single))
        })
        .collect();
    if answers.is_empty() {
        push(&mut violations, Violation::MissingTag);
    }
    let mut answer_indices = Vec::with_capacity(answers.len());
    for region in &answers {
        out.answers.push(region.content.clone());
        if let TagName::Answer(Some(i)) = region.name {
            answer_indices.push(i);
        }
    }
    match schema.answer_mode {
        AnswerMode::Single => {
            if answers.len() > 1 {
                push(&mut violations, Violation::WrongCount);
            }
        }
        AnswerMode::Multi => {
            let mut sorted = answer_indices.clone();
            sorted.sort_unstable();
            sorted.dedup();
            let expected: Vec<usize> = (1..=schema.k).collect();
            if !answers.is_empty() && sorted != expected {
                push(&mut violations, Violation::WrongCount);
            }
            if answer_indices.windows(2).any(|w| w[0] >= w[1]) {
                push(&mut violations, Violation::TagOrder);
            }
        }
    }

    // Confidences, when the schema is calibrated.
    if schema.calibrated {
        let confs: Vec<&Region> = regions
            .iter()
            .filter(|r| {
                matches!(r.name, TagName::Confidence(idx)
                if idx.is_none() == (schema.answer_mode == AnswerMode::Single))
            })
            .collect();
        if confs.is_empty() {
            push(&mut violations, Violation::MissingTag);
        }
        match schema.answer_mode {
            AnswerMode::Single => {
                if confs.len() > 1 {
                    push(&mut violations, Violation::WrongCount);
                }
            }
            AnswerMode::Multi => {
                let mut indices: Vec<usize> = confs
                    .iter()
                    .filter_map(|r| match r.name {
                        TagName::Confidence(Some(i)) => Some(i),
                        _ => None,
                    })
                    .collect();
                if indices.windows(2).any(|w| w[0] >= w[1]) {
                    push(&mut violations, Violation::TagOrder);
                }
                indices.sort_unstable();
                indices.dedup();
                let expected: Vec<usize> = (1..=schema.k).collect();
                if !confs.is_empty() && indices != expected {
                    push(&mut violations, Violation::WrongCount);
                }
                // <confidence{i}> follows <answer{i}>.
                for conf in &confs {
                    if let TagName::Confidence(Some(i)) = conf.name {
                        let paired = answers.iter().find(|a| a.name == TagName::Answer(Some(i)));
                        if let Some(answer) = paired {
                            if conf.start < answer.end {
                                push(&mut violations, Violation::TagOrder);
                            }
                        }
                    }
                }
            }
        }

        // Value parsing, aligned slot-by-slot with the answers vector.
        let conf_for_index = |wanted: Option<usize>| -> Option<&Region> {
            confs
                .iter()
                .copied()
                .find(|r| matches!(r.name, TagName::Confidence(i) if i == wanted))
        };
        let mut slots = Vec::with_capacity(answers.len().max(1));
        let slot_keys: Vec<Option<usize>> = if schema.answer_mode == AnswerMode::Single {
            vec![None]
        } else if answers.is_empty() {
            (1..=schema.k).map(Some).collect()
        } else {
            answers
                .iter()
                .map(|a| match a.name {
                    TagName::Answer(i) => i,
                    _ => unreachable!(),
                })
                .collect()
        };
        for key in slot_keys {
            let region = conf_for_index(key);
            let slot = match region {
                None => None,
                Some(r) => match r.content.parse::<f64>() {
                    Err(_) => {
                        push(&mut violations, Violation::ConfNotNumeric);
                        None
                    }
                    Ok(q) if (0.0..=1.0).contains(&q) => Some(q),
                    Ok(q) if options.lenient_confidence && q > 1.0 && q <= 100.0 => {
                        out.warnings.push(format!(
                            "confidence {q} interpreted as a percentage and rescaled to {}",
                            q / 100.0
                        ));
                        Some(q / 100.0)
                    }
                    Ok(_) => {
                        push(&mut violations, Violation::ConfOutOfRange);
                        None
                    }
                },
            };
            slots.push(slot);
        }
        out.confidences = Some(slots);
    }

    // Trailing non-whitespace content after the last expected tag.
    let last_expected_end = regions
        .iter()
        .filter(|r| match r.name {
            TagName::Think => true,
            TagName::Analysis => schema.answer_mode == AnswerMode::Single && schema.calibrated,
            TagName::Answer(idx) => idx.is_none() == (schema.answer_mode == AnswerMode::Single),
            TagName::Confidence(idx) => {
                schema.calibrated && idx.is_none() == (schema.answer_mode == AnswerMode::Single)
            }
        })
        .map(|r| r.end)
        .max();
    if let Some(end) = last_expected_end {
        if !raw.text[end..].trim().is_empty() {
            push(&mut violations, Violation::TrailingContent);
        }
    }

    out.violations = violations;
    out
}

// ---------------------------------------------------------------------------
// canonicalize
// ---------------------------------------------------------------------------

/// Normalize an answer for comparison: lowercase, collapse whitespace runs to
/// single spaces, trim, and strip trailing sentence punctuation. Idempotent.
pub fn canonicalize(text: &str) -> String {
    let lowered = text.to_lowercase();
    let collapsed: Vec<&str> = lowered.split_whitespace().collect();
    let joined = collapsed.join(" ");
    joined
        .trim_end_matches(['.', ',', ';', ':', '!', '?'])
        .trim_end()
        .to_string()
}

// ---------------------------------------------------------------------------
// validate_format
// ---------------------------------------------------------------------------

/// Apply the format rules to a parse result.
///
/// `ok` requires: no parse violations, pairwise-distinct canonical answers,
/// and (calibrated, single-gold regime only) confidence sum at most
/// 1 + [`CONF_SUM_EPSILON`]. The verdict's codes alone decide `ok`.
pub fn validate_format(parsed: &ParsedOutput, schema: &TagSchema) -> FormatVerdict {
    let mut violations = parsed.violations.clone();
    let push = |violations: &mut Vec<Violation>, v: Violation| {
        if !violations.contains(&v) {
            violations.push(v);
        }
    };

    let mut seen = Vec::with_capacity(parsed.answers.len());
    for answer in &parsed.answers {
        let canon = canonicalize(answer);
        if seen.contains(&canon) {
            push(&mut violations, Violation::DuplicateAnswer);
        } else {
            seen.push(canon);
        }
    }

    if schema.calibrated && schema.n_regime == NRegime::SingleGold {
        if let Some(slots) = &parsed.confidences {
            let sum: f64 = slots.iter().flatten().sum();
            if sum > 1.0 + CONF_SUM_EPSILON {
                push(&mut violations, Violation::ConfSumExceedsOne);
            }
        }
    }

    FormatVerdict {
        ok: violations.is_empty(),
        violations,
    }
}

//! Correctness decisions against a gold answer set.
//!
//! The shipped matcher is canonicalized exact string match. The [`Matcher`]
//! trait is the seam where execution-based or semantic matchers would plug in;
//! those are out of scope here.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tagparse::canonicalize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GoldError {
    /// Every provided answer canonicalized to the empty string, or none were
    /// provided at all.
    #[error("a gold set needs at least one non-empty answer")]
    Empty,
}

/// The ground-truth answer set for one prompt.
///
/// Deduplicated under [`canonicalize`] at construction; `n` is the
/// post-deduplication cardinality. Answers whose canonical form is empty are
/// dropped (an empty candidate can never match).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSpec {
    answers: Vec<String>,
    canonical: BTreeSet<String>,
}

impl GoldSpec {
    pub fn new<I, S>(answers: I) -> Result<Self, GoldError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut kept = Vec::new();
        let mut canonical = BTreeSet::new();
        for answer in answers {
            let answer = answer.into();
            let canon = canonicalize(&answer);
            if !canon.is_empty() && canonical.insert(canon) {
                kept.push(answer);
            }
        }
        if kept.is_empty() {
            return Err(GoldError::Empty);
        }
        Ok(Self {
            answers: kept,
            canonical,
        })
    }

    /// Number of distinct canonical gold answers.
    pub fn n(&self) -> usize {
        self.canonical.len()
    }

    /// The retained gold answers, in input order, one per canonical form.
    pub fn answers(&self) -> &[String] {
        &self.answers
    }

    pub fn contains_canonical(&self, canon: &str) -> bool {
        self.canonical.contains(canon)
    }
}

/// Per-candidate correctness indicators, aligned with the candidate list they
/// were computed from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorrectnessVector {
    pub bits: Vec<bool>,
}

impl CorrectnessVector {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of correct candidates.
    pub fn count_correct(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Whether at least one candidate is correct.
    pub fn any_correct(&self) -> bool {
        self.bits.iter().any(|b| *b)
    }
}

/// Decides whether a candidate matches the gold set.
pub trait Matcher {
    fn matches(&self, candidate: &str, gold: &GoldSpec) -> bool;
}

/// Canonicalized exact string match.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatcher;

impl Matcher for ExactMatcher {
    fn matches(&self, candidate: &str, gold: &GoldSpec) -> bool {
        gold.contains_canonical(&canonicalize(candidate))
    }
}

/// True iff the candidate's canonical form equals some gold answer's.
pub fn exact_match(candidate: &str, gold: &GoldSpec) -> bool {
    ExactMatcher.matches(candidate, gold)
}

/// Score each candidate independently. Duplicates each count on their own;
/// deduplication is the format gate's job, not the verifier's.
pub fn verify_set<S: AsRef<str>>(answers: &[S], gold: &GoldSpec) -> CorrectnessVector {
    verify_set_with(&ExactMatcher, answers, gold)
}

/// [`verify_set`] under a caller-supplied matcher.
pub fn verify_set_with<S: AsRef<str>>(
    matcher: &dyn Matcher,
    answers: &[S],
    gold: &GoldSpec,
) -> CorrectnessVector {
    CorrectnessVector {
        bits: answers
            .iter()
            .map(|a| matcher.matches(a.as_ref(), gold))
            .collect(),
    }
}

/// Number of distinct answers under an idempotent canonicalizer.
pub fn unique_count<S, F>(answers: &[S], canonicalizer: F) -> usize
where
    S: AsRef<str>,
    F: Fn(&str) -> String,
{
    let mut seen = BTreeSet::new();
    for answer in answers {
        seen.insert(canonicalizer(answer.as_ref()));
    }
    seen.len()
}

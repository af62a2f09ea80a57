//! Evaluation metrics: effectiveness against planted-bug solutions,
//! generality across grammars, equivalence checks, and the Jaccard summary.
//!
//! Ratios are exact rationals internally; callers render them (typically at
//! two decimals) only at the edge.

use num_rational::Rational64;

use crate::generator::{self, GenError, Limits};
use crate::grammar::{canonicalize, Grammar};
use crate::runner::RunOutcome;
use crate::seed;
use crate::validator::{parse_testcase, set_validity, ValidityError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("no incorrect solutions to measure against")]
    EmptyAp,
    #[error("empty test set")]
    EmptyTestSet,
    #[error("Jaccard summary is undefined when all aggregates are zero")]
    DivisionByZero,
}

/// Per-problem metric bundle.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub problem: String,
    pub element_validity: f64,
    pub set_validity: u8,
    pub element_generality: Option<f64>,
    pub set_generality: Option<u8>,
    pub element_effectiveness: Option<f64>,
    pub set_effectiveness: Option<f64>,
    pub semantically_equivalent: Option<bool>,
    pub syntactically_equivalent: Option<bool>,
}

/// Fraction of incorrect solutions whose outcome on one test differs from
/// the reference outcome. A run that bottoms out (timeout, crash) differs
/// from every concrete output.
pub fn effectiveness_single(
    outcomes: &[RunOutcome],
    reference: &RunOutcome,
) -> Result<Rational64, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::EmptyAp);
    }
    let distinguished = outcomes.iter().filter(|o| *o != reference).count();
    Ok(Rational64::new(
        distinguished as i64,
        outcomes.len() as i64,
    ))
}

/// Mean of [`effectiveness_single`] over the tests, or zero when the test
/// set is not fully valid. `matrix` is indexed `[incorrect_solution][test]`.
pub fn effectiveness_element(
    matrix: &[Vec<RunOutcome>],
    references: &[RunOutcome],
    test_set_valid: bool,
) -> Result<Rational64, MetricsError> {
    if matrix.is_empty() {
        return Err(MetricsError::EmptyAp);
    }
    if references.is_empty() {
        return Err(MetricsError::EmptyTestSet);
    }
    if !test_set_valid {
        return Ok(Rational64::from_integer(0));
    }
    let mut sum = Rational64::from_integer(0);
    for (t, reference) in references.iter().enumerate() {
        let column: Vec<RunOutcome> = matrix.iter().map(|row| row[t].clone()).collect();
        sum += effectiveness_single(&column, reference)?;
    }
    Ok(sum / Rational64::from_integer(references.len() as i64))
}

/// Fraction of incorrect solutions distinguished by at least one test, or
/// zero when the test set is not fully valid.
pub fn effectiveness_set(
    matrix: &[Vec<RunOutcome>],
    references: &[RunOutcome],
    test_set_valid: bool,
) -> Result<Rational64, MetricsError> {
    if matrix.is_empty() {
        return Err(MetricsError::EmptyAp);
    }
    if references.is_empty() {
        return Err(MetricsError::EmptyTestSet);
    }
    if !test_set_valid {
        return Ok(Rational64::from_integer(0));
    }
    let distinguished = matrix
        .iter()
        .filter(|row| row.iter().zip(references).any(|(o, r)| o != r))
        .count();
    Ok(Rational64::new(distinguished as i64, matrix.len() as i64))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generality {
    pub element: Rational64,
    pub set: u8,
}

/// Samples test cases from the ground-truth grammar and measures the
/// fraction the candidate grammar parses. `set` is 1 only on full coverage.
pub fn generality(
    candidate: &Grammar,
    ground: &Grammar,
    n_samples: usize,
    master_seed: u64,
) -> Result<Generality, GenError> {
    let mut samples: Vec<Vec<u8>> = Vec::with_capacity(n_samples);
    let mut round = 0u64;
    while samples.len() < n_samples {
        let suite = generator::generate_suite(
            ground,
            "generality",
            seed::subseed(master_seed, 5, round),
            Limits::default(),
        )?;
        for case in suite.cases {
            if samples.len() == n_samples {
                break;
            }
            samples.push(case.text);
        }
        round += 1;
    }
    let parsed = samples
        .iter()
        .filter(|s| parse_testcase(candidate, s).accepted)
        .count();
    let element = Rational64::new(parsed as i64, n_samples.max(1) as i64);
    Ok(Generality {
        element,
        set: u8::from(element == Rational64::from_integer(1)),
    })
}

/// A candidate grammar is semantically equivalent to the ground truth when
/// its generated suite is fully valid under the ground truth and it parses
/// everything the ground truth generates.
pub fn semantic_equivalence(
    candidate: &Grammar,
    ground: &Grammar,
    n_samples: usize,
    master_seed: u64,
) -> Result<bool, GenError> {
    let suite = generator::generate_suite(
        candidate,
        "candidate",
        seed::subseed(master_seed, 6, 0),
        Limits::default(),
    )?;
    let texts: Vec<Vec<u8>> = suite.cases.into_iter().map(|c| c.text).collect();
    let valid = match set_validity(ground, &texts) {
        Ok(v) => v == 1,
        Err(ValidityError::EmptyTestSet) => false,
    };
    if !valid {
        return Ok(false);
    }
    let gen = generality(candidate, ground, n_samples, master_seed)?;
    Ok(gen.set == 1)
}

/// Structural equality modulo renaming of variables and nonterminals.
pub fn syntactic_equivalence(candidate: &Grammar, ground: &Grammar) -> bool {
    let a = canonicalize(candidate);
    let b = canonicalize(ground);
    a.productions == b.productions && a.constraints == b.constraints
}

/// Jaccard similarity of the semantic-equivalence set against the union of
/// the general and valid sets, from aggregate percentages.
pub fn jaccard_from_percentages(
    sem_eq: Rational64,
    set_gen: Rational64,
    set_val: Rational64,
) -> Result<Rational64, MetricsError> {
    let denom = set_gen + set_val - sem_eq;
    if denom == Rational64::from_integer(0) {
        return Err(MetricsError::DivisionByZero);
    }
    Ok(sem_eq * Rational64::from_integer(100) / denom)
}

/// Aggregates per-problem reports (counting only problems where equivalence
/// was assessed) and applies the Jaccard formula, as a percentage.
pub fn jaccard_summary(reports: &[EvalReport]) -> Result<Rational64, MetricsError> {
    let assessed: Vec<&EvalReport> = reports
        .iter()
        .filter(|r| r.semantically_equivalent.is_some() && r.set_generality.is_some())
        .collect();
    if assessed.is_empty() {
        return Err(MetricsError::EmptyTestSet);
    }
    let n = assessed.len() as i64;
    let pct = |count: i64| Rational64::new(count * 100, n);
    let sem_eq = pct(assessed
        .iter()
        .filter(|r| r.semantically_equivalent == Some(true))
        .count() as i64);
    let set_gen = pct(assessed.iter().filter(|r| r.set_generality == Some(1)).count() as i64);
    let set_val = pct(assessed.iter().filter(|r| r.set_validity == 1).count() as i64);
    jaccard_from_percentages(sem_eq, set_gen, set_val)
}

/// Renders a rational at two decimal places, rounding half away from zero.
pub fn render_2dp(r: Rational64) -> String {
    let scaled = r * Rational64::from_integer(100);
    let rounded = scaled.round().to_integer();
    let sign = if rounded < 0 { "-" } else { "" };
    let abs = rounded.abs();
    format!("{sign}{}.{:02}", abs / 100, abs % 100)
}

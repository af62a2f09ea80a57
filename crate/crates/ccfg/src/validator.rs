//! Validity checking: parses candidate test-case text against a CCFG,
//! binding variables and checking constraints along the way.
//!
//! The parse mirrors the derivation engine: counter choices are forced by
//! the live counter value, so only plain nonterminals with several
//! productions need (bounded) backtracking. Separators are strict — one
//! space per `<s>`, one LF per `<n>`.

use num_rational::Rational64;

use crate::generator::select_counter_production;
use crate::grammar::{
    check_constraint, constraint_fully_bound, Bindings, ConstraintSchedule, CounterArg, Grammar,
    LhsKind, Production, SeparatorKind, Symbol, START,
};

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Accept exactly one extra trailing LF.
    pub lenient_trailing_newline: bool,
    /// Backtracking node budget; exceeding it rejects with a
    /// `ParseBudgetExceeded` reason.
    pub backtrack_budget: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            lenient_trailing_newline: false,
            backtrack_budget: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseFailure {
    pub byte_offset: usize,
    pub expected: String,
    pub found: String,
    pub violated_constraint: Option<String>,
}

impl std::fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "byte {}: expected {}, found {}",
            self.byte_offset, self.expected, self.found
        )?;
        if let Some(c) = &self.violated_constraint {
            write!(f, " (violates {c})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ParseResult {
    pub accepted: bool,
    pub bindings: Bindings,
    pub failure: Option<ParseFailure>,
    /// Non-fatal observations, e.g. integer tokens with leading zeros.
    pub lints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidityError {
    #[error("empty test set")]
    EmptyTestSet,
}

#[derive(Clone)]
struct Conf<'g> {
    pos: usize,
    bindings: Bindings,
    stack: Vec<(&'g Symbol, Option<i64>)>,
}

struct ChoicePoint<'g> {
    conf: Conf<'g>,
    alternatives: Vec<&'g Production>,
    next: usize,
    ctx: Option<i64>,
}

/// Parses `text` as a word of `g`, default options.
pub fn parse_testcase(g: &Grammar, text: &[u8]) -> ParseResult {
    parse_testcase_with(g, text, ParseOptions::default())
}

pub fn parse_testcase_with(g: &Grammar, text: &[u8], opts: ParseOptions) -> ParseResult {
    let schedule = ConstraintSchedule::new(g);
    let start_symbol = Symbol::NonterminalRef {
        name: START.to_string(),
        arg: None,
    };
    let mut conf = Conf {
        pos: 0,
        bindings: Bindings::new(),
        stack: vec![(&start_symbol, None)],
    };
    let mut choices: Vec<ChoicePoint<'_>> = Vec::new();
    let mut lints: Vec<String> = Vec::new();
    let mut best_failure: Option<ParseFailure> = None;
    let mut nodes = 0usize;

    macro_rules! fail {
        ($offset:expr, $expected:expr, $found:expr, $constraint:expr) => {{
            let f = ParseFailure {
                byte_offset: $offset,
                expected: $expected,
                found: $found,
                violated_constraint: $constraint,
            };
            if best_failure
                .as_ref()
                .map(|b| f.byte_offset >= b.byte_offset)
                .unwrap_or(true)
            {
                best_failure = Some(f);
            }
            // backtrack to the most recent choice point with an untried
            // alternative
            let mut restored = false;
            while let Some(cp) = choices.last_mut() {
                if cp.next < cp.alternatives.len() {
                    let mut c = cp.conf.clone();
                    let p = cp.alternatives[cp.next];
                    cp.next += 1;
                    let ctx = cp.ctx;
                    for sym in p.rhs.iter().rev() {
                        c.stack.push((sym, ctx));
                    }
                    let exhausted = cp.next >= cp.alternatives.len();
                    if exhausted {
                        choices.pop();
                    }
                    conf = c;
                    restored = true;
                    break;
                }
                choices.pop();
            }
            if !restored {
                return ParseResult {
                    accepted: false,
                    bindings: Bindings::new(),
                    failure: best_failure,
                    lints,
                };
            }
            continue;
        }};
    }

    loop {
        let Some((sym, ctx)) = conf.stack.pop() else {
            let rest = &text[conf.pos..];
            let done = rest.is_empty() || (opts.lenient_trailing_newline && rest == b"\n");
            if done {
                return ParseResult {
                    accepted: true,
                    bindings: conf.bindings,
                    failure: None,
                    lints,
                };
            }
            fail!(
                conf.pos,
                "end of input".to_string(),
                found_at(text, conf.pos),
                None
            );
        };
        match sym {
            Symbol::Terminal(t) => {
                if text[conf.pos..].starts_with(t.as_bytes()) {
                    conf.pos += t.len();
                } else {
                    fail!(
                        conf.pos,
                        format!("literal `{t}`"),
                        found_at(text, conf.pos),
                        None
                    );
                }
            }
            Symbol::Separator(kind) => {
                let (byte, what) = match kind {
                    SeparatorKind::Space => (b' ', "space"),
                    SeparatorKind::Newline => (b'\n', "newline"),
                };
                if text.get(conf.pos) == Some(&byte) {
                    conf.pos += 1;
                } else {
                    fail!(conf.pos, what.to_string(), found_at(text, conf.pos), None);
                }
            }
            Symbol::Variable { name, indexed } => {
                let start = conf.pos;
                let Some((value, len, leading_zero)) = lex_integer(&text[start..]) else {
                    fail!(start, "integer".to_string(), found_at(text, start), None);
                };
                if leading_zero {
                    lints.push(format!("leading zero in `{name}` at byte {start}"));
                }
                let Some(value) = value else {
                    fail!(
                        start,
                        format!("integer in range for `{name}`"),
                        "integer overflow".to_string(),
                        None
                    );
                };
                conf.pos += len;
                let index = if *indexed { ctx } else { None };
                match index {
                    Some(i) => conf.bindings.bind_indexed(name, i, value),
                    None => {
                        if *indexed {
                            fail!(
                                start,
                                format!("indexed variable `{name}` inside a counter frame"),
                                "no active counter".to_string(),
                                None
                            );
                        }
                        conf.bindings.bind_scalar(name, value)
                    }
                }
                if let Some(violated) = violated_at_binding(g, &schedule, &conf.bindings, name, index)
                {
                    fail!(
                        start,
                        format!("value satisfying `{violated}`"),
                        value.to_string(),
                        Some(violated)
                    );
                }
            }
            Symbol::NonterminalRef { name, arg } => {
                nodes += 1;
                if nodes > opts.backtrack_budget {
                    return ParseResult {
                        accepted: false,
                        bindings: Bindings::new(),
                        failure: Some(ParseFailure {
                            byte_offset: conf.pos,
                            expected: format!(
                                "ParseBudgetExceeded: more than {} nodes",
                                opts.backtrack_budget
                            ),
                            found: String::new(),
                            violated_constraint: None,
                        }),
                        lints,
                    };
                }
                match arg {
                    None => {
                        let plains: Vec<&Production> = g
                            .productions_of(name)
                            .filter(|p| p.lhs_kind == LhsKind::Plain)
                            .collect();
                        match plains.len() {
                            0 => fail!(
                                conf.pos,
                                format!("a plain production for `{name}`"),
                                "none defined".to_string(),
                                None
                            ),
                            1 => {
                                for s in plains[0].rhs.iter().rev() {
                                    conf.stack.push((s, ctx));
                                }
                            }
                            _ => {
                                // ordered choice: try the first alternative,
                                // remember the rest
                                let first = plains[0];
                                choices.push(ChoicePoint {
                                    conf: conf.clone(),
                                    alternatives: plains,
                                    next: 1,
                                    ctx,
                                });
                                for s in first.rhs.iter().rev() {
                                    conf.stack.push((s, ctx));
                                }
                            }
                        }
                    }
                    Some(arg) => {
                        let value = match arg {
                            CounterArg::Same => ctx,
                            CounterArg::Decrement => ctx.map(|c| c - 1),
                            CounterArg::Const(v) => Some(*v as i64),
                            CounterArg::VarRef(v) => conf.bindings.scalar(v),
                        };
                        let Some(value) = value else {
                            fail!(
                                conf.pos,
                                format!("bound counter for `{name}`"),
                                "unbound counter".to_string(),
                                None
                            );
                        };
                        match select_counter_production(g, name, value) {
                            Ok(p) => {
                                for s in p.rhs.iter().rev() {
                                    conf.stack.push((s, Some(value)));
                                }
                            }
                            Err(e) => fail!(conf.pos, e.to_string(), String::new(), None),
                        }
                    }
                }
            }
        }
    }
}

fn found_at(text: &[u8], pos: usize) -> String {
    match text.get(pos) {
        None => "end of input".to_string(),
        Some(b'\n') => "newline".to_string(),
        Some(b' ') => "space".to_string(),
        Some(&c) => format!("`{}`", c as char),
    }
}

/// Lexes an optional-sign integer token. Returns `(value, len, leading_zero)`
/// with `value = None` on i64 overflow.
fn lex_integer(input: &[u8]) -> Option<(Option<i64>, usize, bool)> {
    let mut i = 0;
    if input.first() == Some(&b'-') {
        i = 1;
    }
    let digits_start = i;
    while matches!(input.get(i), Some(c) if c.is_ascii_digit()) {
        i += 1;
    }
    if i == digits_start {
        return None;
    }
    let leading_zero = i - digits_start > 1 && input[digits_start] == b'0';
    let value = std::str::from_utf8(&input[..i]).ok()?.parse::<i64>().ok();
    Some((value, i, leading_zero))
}

/// First triggered constraint that is fully bound and does not hold.
fn violated_at_binding(
    g: &Grammar,
    schedule: &ConstraintSchedule,
    b: &Bindings,
    name: &str,
    current_index: Option<i64>,
) -> Option<String> {
    let info = g.variables.get(name)?;
    for &ci in &info.constraint_indices {
        if !schedule.is_trigger(ci, name) {
            continue;
        }
        let c = &g.constraints[ci];
        if constraint_fully_bound(c, b, current_index)
            && !check_constraint(c, b, current_index).unwrap_or(false)
        {
            return Some(crate::grammar::format_constraint(c));
        }
    }
    None
}

/// Ratio of test cases the ground-truth grammar accepts.
pub fn element_validity(ground: &Grammar, tests: &[Vec<u8>]) -> Result<Rational64, ValidityError> {
    if tests.is_empty() {
        return Err(ValidityError::EmptyTestSet);
    }
    let accepted = tests
        .iter()
        .filter(|t| parse_testcase(ground, t).accepted)
        .count();
    Ok(Rational64::new(accepted as i64, tests.len() as i64))
}

/// 1 iff every test case is accepted.
pub fn set_validity(ground: &Grammar, tests: &[Vec<u8>]) -> Result<u8, ValidityError> {
    let e = element_validity(ground, tests)?;
    Ok(u8::from(e == Rational64::new(1, 1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{derive, Limits, SampleMode};
    use crate::seed;
    use crate::testutil::{example_blocks, grammar_from};

    #[test]
    fn accepts_minimal_blocks_case_with_bindings() {
        let g = example_blocks();
        let r = parse_testcase(&g, b"1\n1 1\n1\n1");
        assert!(r.accepted, "{:?}", r.failure);
        assert_eq!(r.bindings.scalar("t"), Some(1));
        assert_eq!(r.bindings.scalar("n"), Some(1));
        assert_eq!(r.bindings.scalar("k"), Some(1));
        assert_eq!(r.bindings.indexed("a", 1), Some(1));
        assert_eq!(r.bindings.indexed("b", 1), Some(1));
    }

    #[test]
    fn rejects_missing_second_block() {
        let g = example_blocks();
        let r = parse_testcase(&g, b"2\n1 1\n1\n1");
        assert!(!r.accepted);
        let f = r.failure.unwrap();
        assert_eq!(f.found, "end of input");
    }

    #[test]
    fn rejects_constraint_violation_with_reason() {
        let g = example_blocks();
        // k=2 > n=1
        let r = parse_testcase(&g, b"1\n1 2\n1\n1 1");
        assert!(!r.accepted);
        assert_eq!(
            r.failure.unwrap().violated_constraint.as_deref(),
            Some("1<=k<=n<=100")
        );
    }

    #[test]
    fn per_block_scalars_rescope() {
        let g = example_blocks();
        // block 1 has n=2,k=2; block 2 has n=1,k=1: valid even though the
        // second block's n is below the first block's k
        let r = parse_testcase(&g, b"2\n2 2\n1 2\n3 4\n1 1\n5\n6");
        assert!(r.accepted, "{:?}", r.failure);
    }

    #[test]
    fn separator_strictness() {
        let g = example_blocks();
        assert!(!parse_testcase(&g, b"1\n1  1\n1\n1").accepted);
        assert!(!parse_testcase(&g, b"1\n1 1\n1\n1\n").accepted);
        assert!(!parse_testcase(&g, b"1\n1 1\n1\n1 ").accepted);
    }

    #[test]
    fn lenient_trailing_newline_flag() {
        let g = example_blocks();
        let opts = ParseOptions {
            lenient_trailing_newline: true,
            ..ParseOptions::default()
        };
        assert!(parse_testcase_with(&g, b"1\n1 1\n1\n1\n", opts).accepted);
        assert!(!parse_testcase_with(&g, b"1\n1 1\n1\n1\n\n", opts).accepted);
    }

    #[test]
    fn leading_zero_is_a_lint_not_a_rejection() {
        let g = grammar_from(&["<S> -> n"], &["1<=n<=100"]);
        let r = parse_testcase(&g, b"07");
        assert!(r.accepted);
        assert_eq!(r.lints.len(), 1);
    }

    #[test]
    fn plain_alternatives_backtrack_in_listed_order() {
        let g = grammar_from(
            &["<S> -> <A> <s> x", "<A> -> n <s> n", "<A> -> n"],
            &["1<=n<=9", "1<=x<=9"],
        );
        assert!(parse_testcase(&g, b"1 2 3").accepted);
        assert!(parse_testcase(&g, b"1 3").accepted);
        assert!(!parse_testcase(&g, b"1 2 3 4").accepted);
        assert!(!parse_testcase(&g, b"1").accepted);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let g = grammar_from(
            &["<S> -> <A>", "<A> -> <A> x", "<A> -> x"],
            &["1<=x<=9"],
        );
        let opts = ParseOptions {
            backtrack_budget: 5,
            ..ParseOptions::default()
        };
        let r = parse_testcase_with(&g, b"1x1x1x1x1x1x1", opts);
        assert!(!r.accepted);
        assert!(r
            .failure
            .unwrap()
            .expected
            .contains("ParseBudgetExceeded"));
    }

    #[test]
    fn round_trips_derived_cases() {
        let g = example_blocks();
        for s in 0..30u64 {
            for mode in [SampleMode::Full, SampleMode::Log, SampleMode::LogLog, SampleMode::Min] {
                let mut rng = seed::rng_from(s);
                let text = derive(&g, mode, &mut rng, Limits::default()).unwrap();
                let r = parse_testcase(&g, &text);
                assert!(r.accepted, "seed {s} {mode:?}: {:?}", r.failure);
            }
        }
    }

    #[test]
    fn integer_overflow_rejects() {
        let g = grammar_from(&["<S> -> n"], &["1<=n<=100"]);
        let r = parse_testcase(&g, b"99999999999999999999999999");
        assert!(!r.accepted);
    }

    #[test]
    fn validity_ratios() {
        let g = grammar_from(&["<S> -> n"], &["1<=n<=10"]);
        let tests: Vec<Vec<u8>> = vec![
            b"1".to_vec(),
            b"10".to_vec(),
            b"11".to_vec(),
            b"x".to_vec(),
            b"5".to_vec(),
        ];
        assert_eq!(
            element_validity(&g, &tests).unwrap(),
            Rational64::new(3, 5)
        );
        assert_eq!(set_validity(&g, &tests).unwrap(), 0);
        assert_eq!(set_validity(&g, &tests[..2]).unwrap(), 1);
        assert!(matches!(
            element_validity(&g, &[]),
            Err(ValidityError::EmptyTestSet)
        ));
    }
}

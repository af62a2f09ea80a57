//! Counter-aware derivation engine: samples variables inside their
//! constraint intervals, drives counter-parameterized recursion, and
//! assembles length-stratified test suites.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::grammar::{
    check_constraint, constraint_fully_bound, eval_expr, Bindings, Comparator, Constraint,
    ConstraintSchedule, CounterArg, Expr, Grammar, LhsKind, Production, SeparatorKind, Symbol,
    START,
};
use crate::seed;

/// Fallback interval for variables with no usable constraint in one
/// direction.
const DEFAULT_LO: i64 = 1;
const DEFAULT_HI: i64 = 1_000_000_000;

/// How many times a violated post-check may trigger a resample.
const RESAMPLE_TRIES: u32 = 100;

/// Variable-sampling interval options, widest to narrowest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SampleMode {
    /// The full constraint interval.
    Full,
    /// Lower bound plus a log-width window.
    Log,
    /// Lower bound plus a log-log-width window.
    LogLog,
    /// Exactly the minimum.
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LengthClass {
    Short,
    Medium,
    Long,
    Corner,
}

impl LengthClass {
    pub fn as_str(self) -> &'static str {
        match self {
            LengthClass::Short => "short",
            LengthClass::Medium => "medium",
            LengthClass::Long => "long",
            LengthClass::Corner => "corner",
        }
    }
}

/// Resource limits for one derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_bytes: usize,
    pub max_steps: u64,
    pub wall_clock: Duration,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_bytes: 2 * 1024 * 1024,
            max_steps: 10_000_000,
            wall_clock: Duration::from_secs(10),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TestCase {
    pub text: Vec<u8>,
    pub length_class: LengthClass,
    pub seed: u64,
    pub mode_used: SampleMode,
}

/// One failed suite slot, with the last error per attempted mode.
#[derive(Debug, Clone)]
pub struct SlotFailure {
    pub length_class: LengthClass,
    pub slot: usize,
    pub errors: Vec<String>,
}

impl std::fmt::Display for SlotFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} slot {} failed every attempt: {}",
            self.length_class.as_str(),
            self.slot,
            self.errors.join("; ")
        )
    }
}

#[derive(Debug, Clone)]
pub struct TestSuite {
    pub cases: Vec<TestCase>,
    pub grammar_name: String,
    pub master_seed: u64,
    pub failures: Vec<SlotFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("empty interval for `{variable}`: [{lo}, {hi}]")]
    EmptyInterval { variable: String, lo: i64, hi: i64 },
    #[error("`{0}` has constraints but none of its bounds are evaluable yet")]
    UnboundDependency(String),
    #[error("counter of `{nonterminal}` initialized from unbound variable `{variable}`")]
    UnboundCounter {
        nonterminal: String,
        variable: String,
    },
    #[error("counter value {value} for `{nonterminal}` matches no production")]
    InvalidCounter { nonterminal: String, value: i64 },
    #[error("nonterminal `{0}` has no applicable production")]
    NoProduction(String),
    #[error("derivation exceeded {0}")]
    LimitExceeded(String),
    #[error("derivation timed out")]
    GenerationTimeout,
    #[error("constraint arithmetic failed: {0}")]
    Eval(String),
    #[error("no suite slot produced a test case")]
    SuiteEmpty,
}

/// Tightest [lo, hi] interval implied by the grammar's constraints for one
/// variable occurrence under the current bindings.
///
/// A chain like `1<=k<=n<=100` bounds an operand through every monotone run
/// of comparators around it; operands that are not yet evaluable are skipped
/// (they are sampled later and clamped by the same chain).
pub fn variable_interval(
    name: &str,
    indexed: bool,
    g: &Grammar,
    b: &Bindings,
    current_index: Option<i64>,
) -> Result<(i64, i64), GenError> {
    variable_interval_with(name, indexed, g, b, current_index, &ConstraintSchedule::new(g))
}

fn variable_interval_with(
    name: &str,
    indexed: bool,
    g: &Grammar,
    b: &Bindings,
    current_index: Option<i64>,
    schedule: &ConstraintSchedule,
) -> Result<(i64, i64), GenError> {
    let mut lo: Option<i128> = None;
    let mut hi: Option<i128> = None;
    let mut has_constraints = false;
    if let Some(info) = g.variables.get(name) {
        for &ci in &info.constraint_indices {
            let c = &g.constraints[ci];
            for (j, operand) in c.operands.iter().enumerate() {
                let matches_target = matches!(
                    operand,
                    Expr::Var { name: n, indexed: ix } if n == name && *ix == indexed
                );
                if !matches_target {
                    continue;
                }
                has_constraints = true;
                let (chain_lo, chain_hi) = chain_bounds(c, j, b, current_index, name, schedule);
                if let Some(v) = chain_lo {
                    lo = Some(lo.map_or(v, |cur: i128| cur.max(v)));
                }
                if let Some(v) = chain_hi {
                    hi = Some(hi.map_or(v, |cur: i128| cur.min(v)));
                }
            }
        }
    }
    if has_constraints && lo.is_none() && hi.is_none() {
        return Err(GenError::UnboundDependency(name.to_string()));
    }
    let lo = lo.unwrap_or_else(|| hi.map_or(i128::from(DEFAULT_LO), |h| h.min(i128::from(DEFAULT_LO))));
    let hi = hi.unwrap_or_else(|| i128::from(DEFAULT_HI).max(lo));
    let clamp = |v: i128| v.clamp(i128::from(i64::MIN), i128::from(i64::MAX)) as i64;
    let (lo, hi) = (clamp(lo), clamp(hi));
    if lo > hi {
        return Err(GenError::EmptyInterval {
            variable: name.to_string(),
            lo,
            hi,
        });
    }
    Ok((lo, hi))
}

/// Bounds contributed by one chain for the operand at position `j`.
fn chain_bounds(
    c: &Constraint,
    j: usize,
    b: &Bindings,
    current_index: Option<i64>,
    target: &str,
    schedule: &ConstraintSchedule,
) -> (Option<i128>, Option<i128>) {
    let asc = |o: &Comparator| matches!(o, Comparator::Le | Comparator::Lt | Comparator::Eq);
    let desc = |o: &Comparator| matches!(o, Comparator::Ge | Comparator::Gt | Comparator::Eq);
    let strict_lt = |span: &[Comparator]| span.iter().filter(|o| **o == Comparator::Lt).count();
    let strict_gt = |span: &[Comparator]| span.iter().filter(|o| **o == Comparator::Gt).count();
    let mut lo: Option<i128> = None;
    let mut hi: Option<i128> = None;
    let mut push_lo = |v: i128| lo = Some(lo.map_or(v, |cur| cur.max(v)));
    let mut push_hi = |v: i128| hi = Some(hi.map_or(v, |cur| cur.min(v)));
    // operands left of j
    for t in (0..j).rev() {
        let span = &c.ops[t..j];
        if !schedule.usable_bound(&c.operands[t], target) {
            continue;
        }
        let Some(value) = try_eval(&c.operands[t], b, current_index) else {
            continue;
        };
        if span.iter().all(asc) {
            push_lo(value + strict_lt(span) as i128);
        }
        if span.iter().all(desc) {
            push_hi(value - strict_gt(span) as i128);
        }
    }
    // operands right of j
    for t in j + 1..c.operands.len() {
        let span = &c.ops[j..t];
        if !schedule.usable_bound(&c.operands[t], target) {
            continue;
        }
        let Some(value) = try_eval(&c.operands[t], b, current_index) else {
            continue;
        };
        if span.iter().all(asc) {
            push_hi(value - strict_lt(span) as i128);
        }
        if span.iter().all(desc) {
            push_lo(value + strict_gt(span) as i128);
        }
    }
    (lo, hi)
}

fn try_eval(e: &Expr, b: &Bindings, current_index: Option<i64>) -> Option<i128> {
    eval_expr(e, b, current_index).ok()
}

/// Upper endpoint of the mode-narrowed interval. Logarithms are base 2 with
/// floor; widths are clamped so the result never drops below `lo`.
pub fn mode_upper(lo: i64, hi: i64, mode: SampleMode) -> i64 {
    let width = (i128::from(hi) - i128::from(lo) + 1).max(1) as u128;
    let log2 = |x: u128| if x == 0 { 0 } else { x.ilog2() as i64 };
    match mode {
        SampleMode::Full => hi,
        SampleMode::Log => hi.min(lo.saturating_add(log2(width))),
        SampleMode::LogLog => hi.min(lo.saturating_add(log2(log2(width) as u128 + 1))),
        SampleMode::Min => lo,
    }
}

/// Samples one variable uniformly within its mode-narrowed interval, binds
/// it, and re-checks every now-complete constraint mentioning it.
pub fn sample_variable<R: Rng>(
    name: &str,
    index: Option<i64>,
    g: &Grammar,
    b: &mut Bindings,
    mode: SampleMode,
    rng: &mut R,
) -> Result<i64, GenError> {
    sample_variable_with(name, index, g, b, mode, rng, &ConstraintSchedule::new(g))
}

fn sample_variable_with<R: Rng>(
    name: &str,
    index: Option<i64>,
    g: &Grammar,
    b: &mut Bindings,
    mode: SampleMode,
    rng: &mut R,
    schedule: &ConstraintSchedule,
) -> Result<i64, GenError> {
    let indexed = index.is_some();
    let (lo, hi) = variable_interval_with(name, indexed, g, b, index, schedule)?;
    let hi_mode = mode_upper(lo, hi, mode);
    let mut tries = if mode == SampleMode::Min || lo == hi_mode {
        1
    } else {
        RESAMPLE_TRIES
    };
    loop {
        let value = if lo == hi_mode {
            lo
        } else {
            rng.gen_range(lo..=hi_mode)
        };
        match index {
            Some(i) => b.bind_indexed(name, i, value),
            None => b.bind_scalar(name, value),
        }
        match violated_constraint(name, g, b, index, schedule) {
            None => return Ok(value),
            Some(c) => {
                tries -= 1;
                if tries == 0 {
                    return Err(GenError::Eval(format!(
                        "cannot satisfy `{c}` when sampling `{name}` in [{lo}, {hi_mode}]"
                    )));
                }
            }
        }
    }
}

/// First fully bound constraint on `name` that does not hold, if any.
fn violated_constraint<'g>(
    name: &str,
    g: &'g Grammar,
    b: &Bindings,
    current_index: Option<i64>,
    schedule: &ConstraintSchedule,
) -> Option<&'g Constraint> {
    let info = g.variables.get(name)?;
    for &ci in &info.constraint_indices {
        if !schedule.is_trigger(ci, name) {
            continue;
        }
        let c = &g.constraints[ci];
        if constraint_fully_bound(c, b, current_index)
            && !check_constraint(c, b, current_index).unwrap_or(false)
        {
            return Some(c);
        }
    }
    None
}

struct DeriveState<'g, R: Rng> {
    grammar: &'g Grammar,
    schedule: ConstraintSchedule,
    bindings: Bindings,
    out: Vec<u8>,
    steps: u64,
    started: Instant,
    limits: Limits,
    mode: SampleMode,
    rng: &'g mut R,
}

/// Performs one leftmost derivation from `<S>`.
///
/// Expanding `<N_v>` pushes a counter frame with the bound value of `v`;
/// `i-1` references run at the frame value minus one, and indexed variables
/// bind at the innermost counter value. The emitted text satisfies all
/// constraints by construction.
pub fn derive<R: Rng>(
    g: &Grammar,
    mode: SampleMode,
    rng: &mut R,
    limits: Limits,
) -> Result<Vec<u8>, GenError> {
    let mut st = DeriveState {
        grammar: g,
        schedule: ConstraintSchedule::new(g),
        bindings: Bindings::new(),
        out: Vec::new(),
        steps: 0,
        started: Instant::now(),
        limits,
        mode,
        rng,
    };
    // explicit stack: counters can nest thousands of frames deep
    let mut stack: Vec<(&Symbol, Option<i64>)> = Vec::new();
    expand_nonterminal(&mut st, START, None, None, &mut stack)?;
    while let Some((sym, ctx)) = stack.pop() {
        st.steps += 1;
        if st.steps > st.limits.max_steps {
            return Err(GenError::LimitExceeded(format!(
                "{} steps",
                st.limits.max_steps
            )));
        }
        if st.steps.is_multiple_of(1024) && st.started.elapsed() > st.limits.wall_clock {
            return Err(GenError::GenerationTimeout);
        }
        match sym {
            Symbol::Terminal(t) => emit(&mut st, t.as_bytes())?,
            Symbol::Separator(SeparatorKind::Space) => emit(&mut st, b" ")?,
            Symbol::Separator(SeparatorKind::Newline) => emit(&mut st, b"\n")?,
            Symbol::Variable { name, indexed } => {
                let index = if *indexed { ctx } else { None };
                let value = sample_variable_with(
                    name,
                    index,
                    st.grammar,
                    &mut st.bindings,
                    st.mode,
                    st.rng,
                    &st.schedule,
                )?;
                emit(&mut st, value.to_string().as_bytes())?;
            }
            Symbol::NonterminalRef { name, arg } => {
                expand_nonterminal(&mut st, name, arg.as_ref(), ctx, &mut stack)?;
            }
        }
    }
    Ok(st.out)
}

fn emit<R: Rng>(st: &mut DeriveState<'_, R>, bytes: &[u8]) -> Result<(), GenError> {
    if st.out.len() + bytes.len() > st.limits.max_bytes {
        return Err(GenError::LimitExceeded(format!(
            "{} bytes",
            st.limits.max_bytes
        )));
    }
    st.out.extend_from_slice(bytes);
    Ok(())
}

fn expand_nonterminal<'g, R: Rng>(
    st: &mut DeriveState<'g, R>,
    name: &'g str,
    arg: Option<&CounterArg>,
    ctx: Option<i64>,
    stack: &mut Vec<(&'g Symbol, Option<i64>)>,
) -> Result<(), GenError> {
    let (production, new_ctx) = match arg {
        None => {
            let plains: Vec<&Production> = st
                .grammar
                .productions_of(name)
                .filter(|p| p.lhs_kind == LhsKind::Plain)
                .collect();
            if plains.is_empty() {
                return Err(GenError::NoProduction(name.to_string()));
            }
            let pick = if plains.len() == 1 {
                0
            } else {
                st.rng.gen_range(0..plains.len())
            };
            // plain expansions inherit the innermost counter frame
            (plains[pick], ctx)
        }
        Some(arg) => {
            let value = resolve_counter(st, name, arg, ctx)?;
            (select_counter_production(st.grammar, name, value)?, Some(value))
        }
    };
    for sym in production.rhs.iter().rev() {
        stack.push((sym, new_ctx));
    }
    Ok(())
}

fn resolve_counter<R: Rng>(
    st: &DeriveState<'_, R>,
    name: &str,
    arg: &CounterArg,
    ctx: Option<i64>,
) -> Result<i64, GenError> {
    match arg {
        CounterArg::Same => ctx.ok_or_else(|| GenError::InvalidCounter {
            nonterminal: name.to_string(),
            value: 0,
        }),
        CounterArg::Decrement => ctx.map(|c| c - 1).ok_or_else(|| GenError::InvalidCounter {
            nonterminal: name.to_string(),
            value: -1,
        }),
        CounterArg::Const(v) => Ok(*v as i64),
        CounterArg::VarRef(v) => {
            st.bindings
                .scalar(v)
                .ok_or_else(|| GenError::UnboundCounter {
                    nonterminal: name.to_string(),
                    variable: v.clone(),
                })
        }
    }
}

/// Counter protocol: a base production whose subscript equals the live
/// counter wins; otherwise the counter-parameterized production applies
/// while the counter exceeds some base value.
pub fn select_counter_production<'g>(
    g: &'g Grammar,
    name: &'g str,
    value: i64,
) -> Result<&'g Production, GenError> {
    let mut counter_param = None;
    let mut min_base: Option<i64> = None;
    for p in g.productions_of(name) {
        match p.lhs_kind {
            LhsKind::Base(v) if v as i64 == value => return Ok(p),
            LhsKind::Base(v) => {
                let v = v as i64;
                min_base = Some(min_base.map_or(v, |m: i64| m.min(v)));
            }
            LhsKind::CounterParam if counter_param.is_none() => counter_param = Some(p),
            _ => {}
        }
    }
    match (counter_param, min_base) {
        (Some(p), Some(min)) if value > min => Ok(p),
        _ => Err(GenError::InvalidCounter {
            nonterminal: name.to_string(),
            value,
        }),
    }
}

/// Stream ids for per-slot seed derivation.
const STREAM_LONG: u64 = 1;
const STREAM_MEDIUM: u64 = 2;
const STREAM_SHORT: u64 = 3;
const STREAM_CORNER: u64 = 4;

fn mode_order(class: LengthClass) -> &'static [SampleMode] {
    match class {
        LengthClass::Long => &[SampleMode::Full, SampleMode::Log, SampleMode::LogLog],
        LengthClass::Medium => &[SampleMode::Log, SampleMode::LogLog],
        LengthClass::Short => &[SampleMode::LogLog],
        LengthClass::Corner => &[SampleMode::Min],
    }
}

/// Generates the 30-case stratified suite: ten slots per length class with
/// mode fallback, then one minimum-value derivation that replaces the last
/// short slot as the corner case.
pub fn generate_suite(
    g: &Grammar,
    grammar_name: &str,
    master_seed: u64,
    limits: Limits,
) -> Result<TestSuite, GenError> {
    let mut cases = Vec::new();
    let mut failures = Vec::new();
    let classes = [
        (LengthClass::Long, STREAM_LONG),
        (LengthClass::Medium, STREAM_MEDIUM),
        (LengthClass::Short, STREAM_SHORT),
    ];
    for (class, stream) in classes {
        for slot in 0..10u64 {
            match derive_slot(g, class, stream, slot, master_seed, limits) {
                Ok(case) => cases.push(case),
                Err(errors) => failures.push(SlotFailure {
                    length_class: class,
                    slot: slot as usize,
                    errors,
                }),
            }
        }
    }
    match derive_slot(g, LengthClass::Corner, STREAM_CORNER, 0, master_seed, limits) {
        Ok(corner) => {
            // the corner case replaces the last short slot
            let last_short = cases
                .iter()
                .rposition(|c| c.length_class == LengthClass::Short);
            match last_short {
                Some(i) => cases[i] = corner,
                None => cases.push(corner),
            }
        }
        Err(errors) => failures.push(SlotFailure {
            length_class: LengthClass::Corner,
            slot: 0,
            errors,
        }),
    }
    if cases.is_empty() {
        return Err(GenError::SuiteEmpty);
    }
    Ok(TestSuite {
        cases,
        grammar_name: grammar_name.to_string(),
        master_seed,
        failures,
    })
}

fn derive_slot(
    g: &Grammar,
    class: LengthClass,
    stream: u64,
    slot: u64,
    master_seed: u64,
    limits: Limits,
) -> Result<TestCase, Vec<String>> {
    let mut errors = Vec::new();
    for (attempt, &mode) in mode_order(class).iter().enumerate() {
        let case_seed = seed::subseed(master_seed, stream, slot * 8 + attempt as u64);
        let mut rng = seed::rng_from(case_seed);
        match derive(g, mode, &mut rng, limits) {
            Ok(text) => {
                return Ok(TestCase {
                    text,
                    length_class: class,
                    seed: case_seed,
                    mode_used: mode,
                })
            }
            Err(e) => errors.push(format!("{mode:?}: {e}")),
        }
    }
    Err(errors)
}

/// Deterministic ten-case selection for effectiveness evaluation: the corner
/// case plus short cases up to four, then the first three medium and long
/// cases.
pub fn select_for_eval(s: &TestSuite) -> Vec<&TestCase> {
    let mut out: Vec<&TestCase> = Vec::new();
    out.extend(
        s.cases
            .iter()
            .filter(|c| c.length_class == LengthClass::Corner)
            .take(1),
    );
    let shorts_wanted = 4 - out.len();
    out.extend(
        s.cases
            .iter()
            .filter(|c| c.length_class == LengthClass::Short)
            .take(shorts_wanted),
    );
    out.extend(
        s.cases
            .iter()
            .filter(|c| c.length_class == LengthClass::Medium)
            .take(3),
    );
    out.extend(
        s.cases
            .iter()
            .filter(|c| c.length_class == LengthClass::Long)
            .take(3),
    );
    out
}

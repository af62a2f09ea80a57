//! CCFG data model: counter-parameterized productions, constraint chains,
//! and the textual codec for the JSON grammar format.

mod canon;
mod expr;
mod parse;
mod schedule;
mod validate;

pub use canon::canonicalize;
pub use expr::{check_constraint, constraint_fully_bound, eval_expr, BindingEntry, Bindings, EvalError};
pub use parse::{parse_constraint, parse_production, ParseError};
pub use schedule::ConstraintSchedule;
pub use validate::{validate_grammar, Diagnostic, DiagnosticKind, Severity};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Layout terminals: `<s>` is a single space, `<n>` a single newline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SeparatorKind {
    Space,
    Newline,
}

/// Counter argument of a nonterminal reference, e.g. the `t` in `<T_t>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CounterArg {
    /// `i` — the enclosing production's counter value.
    Same,
    /// `i-1` — the enclosing counter minus one.
    Decrement,
    /// A literal counter value, e.g. `<T_5>`.
    Const(u64),
    /// A previously bound variable, e.g. `<T_t>`.
    VarRef(String),
}

/// One token on the right-hand side of a production.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    /// A literal token emitted verbatim.
    Terminal(String),
    /// An integer variable; `indexed` when written `name_i`.
    Variable { name: String, indexed: bool },
    Separator(SeparatorKind),
    /// Reference to another nonterminal. `arg` is `None` for plain
    /// references like `<T>`.
    NonterminalRef {
        name: String,
        arg: Option<CounterArg>,
    },
}

/// Shape of a production's left-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LhsKind {
    /// `<S>` — no counter.
    Plain,
    /// `<T_i>` — recursive case parameterized by the counter.
    CounterParam,
    /// `<T_1>` — base case for a literal counter value.
    Base(u64),
}

/// A single rewrite rule. An empty `rhs` denotes ε.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Production {
    pub lhs_name: String,
    pub lhs_kind: LhsKind,
    pub rhs: Vec<Symbol>,
}

/// Comparators permitted in constraint chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Comparator {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
}

impl Comparator {
    pub fn as_str(self) -> &'static str {
        match self {
            Comparator::Le => "<=",
            Comparator::Lt => "<",
            Comparator::Ge => ">=",
            Comparator::Gt => ">",
            Comparator::Eq => "=",
        }
    }

    pub fn holds(self, lhs: i128, rhs: i128) -> bool {
        match self {
            Comparator::Le => lhs <= rhs,
            Comparator::Lt => lhs < rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Eq => lhs == rhs,
        }
    }
}

/// Arithmetic operators inside constraint expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOpKind {
    Add,
    Sub,
    Mul,
}

impl BinOpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BinOpKind::Add => "+",
            BinOpKind::Sub => "-",
            BinOpKind::Mul => "*",
        }
    }
}

/// Constraint operand. Evaluation is exact integer arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    IntConst(i128),
    /// `b^e`, computed exactly.
    Power { base: i128, exponent: u32 },
    Var { name: String, indexed: bool },
    BinOp {
        op: BinOpKind,
        left: Box<Expr>,
        right: Box<Expr>,
    },
}

/// A comparator chain like `1<=k<=n<=100`. A chain with k operands is the
/// conjunction of its k-1 adjacent comparisons.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub operands: Vec<Expr>,
    pub ops: Vec<Comparator>,
}

/// Entry in the derived variable table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableInfo {
    pub name: String,
    pub indexed: bool,
    /// Indices into `Grammar::constraints` of chains mentioning this variable.
    pub constraint_indices: Vec<usize>,
}

/// The start nonterminal. Fixed by the grammar format.
pub const START: &str = "S";

/// A loaded CCFG: productions, constraint chains, and the derived variable
/// table. Immutable after load; all operations on it are pure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    pub productions: Vec<Production>,
    pub constraints: Vec<Constraint>,
    pub variables: BTreeMap<String, VariableInfo>,
}

impl Grammar {
    /// Productions for a nonterminal, in listed order.
    pub fn productions_of<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Production> {
        self.productions.iter().filter(move |p| p.lhs_name == name)
    }

    pub fn has_nonterminal(&self, name: &str) -> bool {
        self.productions.iter().any(|p| p.lhs_name == name)
    }

    /// All variable occurrences in rhs positions, in production order.
    pub fn variable_occurrences(&self) -> impl Iterator<Item = (&str, bool)> {
        self.productions.iter().flat_map(|p| {
            p.rhs.iter().filter_map(|s| match s {
                Symbol::Variable { name, indexed } => Some((name.as_str(), *indexed)),
                _ => None,
            })
        })
    }
}

/// Errors aggregated by [`load_grammar`].
#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("grammar line {line}: {source}")]
    Production {
        line: usize,
        #[source]
        source: ParseError,
    },
    #[error("constraint line {line}: {source}")]
    Constraint {
        line: usize,
        #[source]
        source: ParseError,
    },
    #[error("{0}")]
    Structural(Diagnostic),
}

/// On-disk grammar file shape: `{"grammar": [...], "constraints": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrammarFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub grammar: Vec<String>,
    pub constraints: Vec<String>,
}

/// Parses production and constraint lines into a checked [`Grammar`].
///
/// All per-line parse errors and error-severity structural diagnostics are
/// aggregated; the grammar is returned only when none exist.
pub fn load_grammar(
    grammar_lines: &[String],
    constraint_lines: &[String],
) -> Result<Grammar, Vec<LoadError>> {
    let mut errors = Vec::new();
    let mut productions = Vec::new();
    for (idx, line) in grammar_lines.iter().enumerate() {
        match parse_production(line) {
            Ok(p) => productions.push(p),
            Err(e) => errors.push(LoadError::Production {
                line: idx + 1,
                source: e,
            }),
        }
    }
    let mut constraints = Vec::new();
    for (idx, line) in constraint_lines.iter().enumerate() {
        match parse_constraint(line) {
            Ok(c) => constraints.push(c),
            Err(e) => errors.push(LoadError::Constraint {
                line: idx + 1,
                source: e,
            }),
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    let grammar = assemble(productions, constraints);
    for diag in validate_grammar(&grammar) {
        if diag.severity == Severity::Error {
            errors.push(LoadError::Structural(diag));
        }
    }
    if errors.is_empty() {
        Ok(grammar)
    } else {
        Err(errors)
    }
}

/// Builds a [`Grammar`] and its variable table without running validation.
pub fn assemble(productions: Vec<Production>, constraints: Vec<Constraint>) -> Grammar {
    let mut variables: BTreeMap<String, VariableInfo> = BTreeMap::new();
    for p in &productions {
        for s in &p.rhs {
            if let Symbol::Variable { name, indexed } = s {
                variables
                    .entry(name.clone())
                    .and_modify(|v| v.indexed |= *indexed)
                    .or_insert_with(|| VariableInfo {
                        name: name.clone(),
                        indexed: *indexed,
                        constraint_indices: Vec::new(),
                    });
            }
        }
    }
    for (ci, c) in constraints.iter().enumerate() {
        for name in constraint_variables(c) {
            if let Some(info) = variables.get_mut(&name) {
                info.constraint_indices.push(ci);
            }
        }
    }
    Grammar {
        productions,
        constraints,
        variables,
    }
}

/// Distinct variable names mentioned anywhere in a constraint chain.
pub fn constraint_variables(c: &Constraint) -> Vec<String> {
    let mut out = Vec::new();
    for e in &c.operands {
        expr_variables(e, &mut out);
    }
    out.dedup();
    out
}

pub(crate) fn expr_variables(e: &Expr, out: &mut Vec<String>) {
    match e {
        Expr::Var { name, .. } => {
            if !out.contains(name) {
                out.push(name.clone());
            }
        }
        Expr::BinOp { left, right, .. } => {
            expr_variables(left, out);
            expr_variables(right, out);
        }
        _ => {}
    }
}

pub fn format_production(p: &Production) -> String {
    let lhs = match p.lhs_kind {
        LhsKind::Plain => format!("<{}>", p.lhs_name),
        LhsKind::CounterParam => format!("<{}_i>", p.lhs_name),
        LhsKind::Base(v) => format!("<{}_{}>", p.lhs_name, v),
    };
    let mut out = format!("{lhs} ->");
    for sym in &p.rhs {
        out.push(' ');
        out.push_str(&format_symbol(sym));
    }
    out
}

pub fn format_symbol(sym: &Symbol) -> String {
    match sym {
        Symbol::Terminal(t) => t.clone(),
        Symbol::Variable { name, indexed } => {
            if *indexed {
                format!("{name}_i")
            } else {
                name.clone()
            }
        }
        Symbol::Separator(SeparatorKind::Space) => "<s>".to_string(),
        Symbol::Separator(SeparatorKind::Newline) => "<n>".to_string(),
        Symbol::NonterminalRef { name, arg } => match arg {
            None => format!("<{name}>"),
            Some(CounterArg::Same) => format!("<{name}_i>"),
            Some(CounterArg::Decrement) => format!("<{name}_i-1>"),
            Some(CounterArg::Const(v)) => format!("<{name}_{v}>"),
            Some(CounterArg::VarRef(v)) => format!("<{name}_{v}>"),
        },
    }
}

pub fn format_constraint(c: &Constraint) -> String {
    let mut out = format_expr(&c.operands[0]);
    for (op, operand) in c.ops.iter().zip(c.operands.iter().skip(1)) {
        out.push_str(op.as_str());
        out.push_str(&format_expr(operand));
    }
    out
}

pub fn format_expr(e: &Expr) -> String {
    format_expr_prec(e, 0)
}

// prec 0: additive context, 1: multiplicative, 2: atom
fn format_expr_prec(e: &Expr, prec: u8) -> String {
    match e {
        Expr::IntConst(v) => v.to_string(),
        Expr::Power { base, exponent } => format!("{base}^{exponent}"),
        Expr::Var { name, indexed } => {
            if *indexed {
                format!("{name}_i")
            } else {
                name.clone()
            }
        }
        Expr::BinOp { op, left, right } => {
            let own = match op {
                BinOpKind::Add | BinOpKind::Sub => 1u8,
                BinOpKind::Mul => 2u8,
            };
            let left_s = format_expr_prec(left, own - 1);
            // right child needs parens at equal precedence: `-` and the
            // parser's left associativity
            let right_s = format_expr_prec(right, own);
            let body = format!("{}{}{}", left_s, op.as_str(), right_s);
            if own <= prec {
                format!("({body})")
            } else {
                body
            }
        }
    }
}

impl fmt::Display for Production {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_production(self))
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_constraint(self))
    }
}

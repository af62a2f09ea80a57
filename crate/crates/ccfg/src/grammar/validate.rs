//! Decidable well-formedness checks. Full CCFG validity is undecidable, so
//! this module only checks structural invariants and a static dependency
//! analysis over the derivation order.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use super::{constraint_variables, CounterArg, Expr, Grammar, LhsKind, Symbol, START};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiagnosticKind {
    /// No `<S>` production with a plain left-hand side.
    MissingStart,
    /// A rhs references a nonterminal with no productions.
    UnknownNonterminal(String),
    /// A counter-parameterized nonterminal has no base production.
    MissingBaseCase(String),
    /// A constraint mentions a variable that appears in no production rhs.
    UnhousedVariable(String),
    /// A counter is initialized from a name that is not a grammar variable,
    /// or one first bound after the reference in derivation order.
    UnboundCounterVariable(String),
    /// The same name is used for both a variable and a nonterminal.
    NameCollision(String),
    /// `i`/`i-1` used outside a counter-parameterized production.
    MisplacedCounterRef(String),
    /// A counter-parameterized production decrements its own nonterminal
    /// more than once.
    MultipleDecrement(String),
    /// No derivation from this nonterminal can terminate.
    NonTerminating(String),
    /// A constraint bounds a variable only through variables bound later in
    /// derivation order.
    ForwardDependency { variable: String, depends_on: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}", self.message)
    }
}

impl std::error::Error for Diagnostic {}

fn error(kind: DiagnosticKind, message: String) -> Diagnostic {
    Diagnostic {
        severity: Severity::Error,
        kind,
        message,
    }
}

fn warning(kind: DiagnosticKind, message: String) -> Diagnostic {
    Diagnostic {
        severity: Severity::Warning,
        kind,
        message,
    }
}

/// Checks all decidable grammar invariants. Returns diagnostics rather than
/// failing; an empty list means the grammar is well-formed.
pub fn validate_grammar(g: &Grammar) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    let nonterminals: BTreeSet<&str> = g.productions.iter().map(|p| p.lhs_name.as_str()).collect();

    if !g
        .productions
        .iter()
        .any(|p| p.lhs_name == START && p.lhs_kind == LhsKind::Plain)
    {
        diags.push(error(
            DiagnosticKind::MissingStart,
            format!("no plain production for start nonterminal `{START}`"),
        ));
    }

    for name in g.variables.keys() {
        if nonterminals.contains(name.as_str()) {
            diags.push(error(
                DiagnosticKind::NameCollision(name.clone()),
                format!("`{name}` is used as both a variable and a nonterminal"),
            ));
        }
    }

    let mut counter_nts: BTreeSet<&str> = BTreeSet::new();
    let mut base_nts: BTreeSet<&str> = BTreeSet::new();
    for p in &g.productions {
        match p.lhs_kind {
            LhsKind::CounterParam => {
                counter_nts.insert(&p.lhs_name);
            }
            LhsKind::Base(_) => {
                base_nts.insert(&p.lhs_name);
            }
            LhsKind::Plain => {}
        }
        let mut decrements = 0usize;
        for sym in &p.rhs {
            if let Symbol::NonterminalRef { name, arg } = sym {
                if !nonterminals.contains(name.as_str()) {
                    diags.push(error(
                        DiagnosticKind::UnknownNonterminal(name.clone()),
                        format!("reference to undefined nonterminal `{name}` in `{p}`"),
                    ));
                }
                match arg {
                    Some(CounterArg::Decrement) => {
                        if name == &p.lhs_name {
                            decrements += 1;
                        }
                        if p.lhs_kind != LhsKind::CounterParam {
                            diags.push(error(
                                DiagnosticKind::MisplacedCounterRef(name.clone()),
                                format!("`i-1` reference outside a counter-parameterized production: `{p}`"),
                            ));
                        }
                    }
                    Some(CounterArg::Same) if p.lhs_kind != LhsKind::CounterParam => {
                        diags.push(error(
                            DiagnosticKind::MisplacedCounterRef(name.clone()),
                            format!("`i` reference outside a counter-parameterized production: `{p}`"),
                        ));
                    }
                    _ => {}
                }
            }
        }
        if decrements > 1 {
            diags.push(error(
                DiagnosticKind::MultipleDecrement(p.lhs_name.clone()),
                format!("`{p}` decrements `{}` more than once", p.lhs_name),
            ));
        }
    }

    for nt in &counter_nts {
        if !base_nts.contains(nt) {
            diags.push(error(
                DiagnosticKind::MissingBaseCase((*nt).to_string()),
                format!("counter-parameterized nonterminal `{nt}` has no base production"),
            ));
        }
    }

    for c in &g.constraints {
        for var in constraint_variables(c) {
            if !g.variables.contains_key(&var) && !nonterminals.contains(var.as_str()) {
                diags.push(error(
                    DiagnosticKind::UnhousedVariable(var.clone()),
                    format!("constraint `{c}` bounds `{var}`, which appears in no production"),
                ));
            }
        }
    }

    let order = binding_order(g);

    // counter initializers must be variables bound before the reference
    for (pos, p) in walk_order(g) {
        for (sym_pos, sym) in p.rhs.iter().enumerate() {
            if let Symbol::NonterminalRef {
                arg: Some(CounterArg::VarRef(v)),
                ..
            } = sym
            {
                let bound_before = order
                    .get(v.as_str())
                    .map(|&(bp, bs)| (bp, bs) < (pos, sym_pos))
                    .unwrap_or(false);
                if !bound_before {
                    diags.push(error(
                        DiagnosticKind::UnboundCounterVariable(v.clone()),
                        format!("counter of `{}` initialized from `{v}`, which is not bound earlier in derivation order", super::format_symbol(sym)),
                    ));
                }
            }
        }
    }

    diags.extend(forward_dependency_warnings(g, &order));
    diags.extend(termination_errors(g, &nonterminals));
    diags
}

/// Productions in static derivation order: the start nonterminal's
/// productions first, then the rest in listed order.
fn walk_order(g: &Grammar) -> Vec<(usize, &super::Production)> {
    let mut out: Vec<(usize, &super::Production)> = Vec::new();
    for p in g.productions.iter().filter(|p| p.lhs_name == START) {
        out.push((out.len(), p));
    }
    for p in g.productions.iter().filter(|p| p.lhs_name != START) {
        out.push((out.len(), p));
    }
    out
}

/// First-binding position of each variable: (production position in walk
/// order, symbol position in rhs).
fn binding_order(g: &Grammar) -> HashMap<&str, (usize, usize)> {
    let mut order = HashMap::new();
    for (pos, p) in walk_order(g) {
        for (sym_pos, sym) in p.rhs.iter().enumerate() {
            if let Symbol::Variable { name, .. } = sym {
                order.entry(name.as_str()).or_insert((pos, sym_pos));
            }
        }
    }
    order
}

/// Flags variables whose only bound in some direction comes from variables
/// first bound later in derivation order.
fn forward_dependency_warnings(
    g: &Grammar,
    order: &HashMap<&str, (usize, usize)>,
) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for c in &g.constraints {
        for (j, operand) in c.operands.iter().enumerate() {
            let Expr::Var { name, .. } = operand else {
                continue;
            };
            let Some(&my_pos) = order.get(name.as_str()) else {
                continue;
            };
            for lower in [true, false] {
                let mut has_available = false;
                let mut later_var: Option<String> = None;
                for (other, span_ok) in chain_candidates(c, j, lower) {
                    if !span_ok {
                        break;
                    }
                    let vars = expr_vars(other);
                    let all_earlier = vars
                        .iter()
                        .all(|v| order.get(v.as_str()).map(|&p| p < my_pos).unwrap_or(false));
                    if vars.is_empty() || all_earlier {
                        has_available = true;
                    } else if later_var.is_none() {
                        later_var = vars
                            .iter()
                            .find(|v| order.get(v.as_str()).map(|&p| p >= my_pos).unwrap_or(true))
                            .cloned();
                    }
                }
                if let (false, Some(dep)) = (has_available, later_var) {
                    if dep != *name && seen.insert((name.clone(), dep.clone())) {
                        out.push(warning(
                            DiagnosticKind::ForwardDependency {
                                variable: name.clone(),
                                depends_on: dep.clone(),
                            },
                            format!(
                                "constraint `{c}` bounds `{name}` only through `{dep}`, which is bound later in derivation order"
                            ),
                        ));
                    }
                }
            }
        }
    }
    out
}

/// Walks outward from operand `j` in the lower-bound (left for `<=` runs)
/// or upper-bound direction, yielding candidate bounding operands while the
/// comparator span stays monotone.
fn chain_candidates(
    c: &super::Constraint,
    j: usize,
    lower: bool,
) -> Vec<(&Expr, bool)> {
    use super::Comparator::*;
    let mut out = Vec::new();
    // left side: ops[t..j], right side: ops[j..t]
    let left = |span: &[super::Comparator]| span.iter().all(|o| matches!(o, Le | Lt | Eq));
    let right_ge = |span: &[super::Comparator]| span.iter().all(|o| matches!(o, Ge | Gt | Eq));
    if lower {
        // lower bounds: operands to the left across <=/< runs, or to the
        // right across >=/> runs
        for t in (0..j).rev() {
            let ok = left(&c.ops[t..j]);
            out.push((&c.operands[t], ok));
        }
        for t in j + 1..c.operands.len() {
            let ok = right_ge(&c.ops[j..t]);
            out.push((&c.operands[t], ok));
        }
    } else {
        for t in j + 1..c.operands.len() {
            let ok = c.ops[j..t].iter().all(|o| matches!(o, Le | Lt | Eq));
            out.push((&c.operands[t], ok));
        }
        for t in (0..j).rev() {
            let ok = c.ops[t..j].iter().all(|o| matches!(o, Ge | Gt | Eq));
            out.push((&c.operands[t], ok));
        }
    }
    out
}

fn expr_vars(e: &Expr) -> Vec<String> {
    let mut out = Vec::new();
    super::expr_variables(e, &mut out);
    out
}

/// Least fixpoint of "some production of N can terminate".
fn termination_errors(g: &Grammar, nonterminals: &BTreeSet<&str>) -> Vec<Diagnostic> {
    let mut terminating: BTreeSet<&str> = BTreeSet::new();
    let has_counter_shape: BTreeMap<&str, bool> = nonterminals
        .iter()
        .map(|&nt| {
            let counterish = g
                .productions_of(nt)
                .any(|p| !matches!(p.lhs_kind, LhsKind::Plain));
            (nt, counterish)
        })
        .collect();
    loop {
        let mut changed = false;
        for &nt in nonterminals {
            if terminating.contains(nt) {
                continue;
            }
            let counterish = has_counter_shape[nt];
            let ok = g.productions_of(nt).any(|p| {
                // counter-shaped nonterminals bottom out at a base production
                if counterish && !matches!(p.lhs_kind, LhsKind::Base(_)) {
                    return false;
                }
                p.rhs.iter().all(|sym| match sym {
                    Symbol::NonterminalRef { name, arg } => match arg {
                        Some(CounterArg::Decrement) | Some(CounterArg::Same)
                            if name == &p.lhs_name =>
                        {
                            true
                        }
                        _ => terminating.contains(name.as_str()),
                    },
                    _ => true,
                })
            });
            if ok {
                terminating.insert(nt);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut reachable: HashSet<&str> = HashSet::new();
    let mut stack = vec![START];
    while let Some(nt) = stack.pop() {
        if !reachable.insert(nt) {
            continue;
        }
        for p in g.productions_of(nt) {
            for sym in &p.rhs {
                if let Symbol::NonterminalRef { name, .. } = sym {
                    stack.push(name.as_str());
                }
            }
        }
    }
    nonterminals
        .iter()
        .filter(|nt| reachable.contains(*nt) && !terminating.contains(*nt))
        .map(|nt| {
            error(
                DiagnosticKind::NonTerminating((*nt).to_string()),
                format!("no derivation from `{nt}` terminates"),
            )
        })
        .collect()
}

//! Shared helpers for integration tests: fixture loading and an
//! independent brute-force language enumerator used as a parser oracle.
//!
//! The enumerator deliberately re-derives everything from the grammar data
//! model — its own expression evaluation, constraint scheduling, and
//! counter dispatch — so agreement with the production code is meaningful.

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use ccfg::grammar::{
    BinOpKind, Comparator, Constraint, CounterArg, Expr, Grammar, LhsKind, SeparatorKind, Symbol,
    START,
};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Loads every fixture grammar, keyed by file stem, in name order.
pub fn load_corpus() -> Vec<(String, Grammar)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixtures_dir())
        .expect("fixtures directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let file: ccfg::grammar::GrammarFile =
                serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
            let g = ccfg::grammar::load_grammar(&file.grammar, &file.constraints)
                .unwrap_or_else(|e| panic!("fixture {name}: {e:?}"));
            (name, g)
        })
        .collect()
}

// ---- independent evaluation machinery -------------------------------

#[derive(Clone, Default)]
struct Env {
    scalars: HashMap<String, i64>,
    indexed: HashMap<(String, i64), i64>,
}

fn eval(e: &Expr, env: &Env, idx: Option<i64>) -> Option<i64> {
    match e {
        Expr::IntConst(v) => i64::try_from(*v).ok(),
        Expr::Power { base, exponent } => {
            let b = i64::try_from(*base).ok()?;
            b.checked_pow(*exponent)
        }
        Expr::Var { name, indexed } => {
            if *indexed {
                env.indexed.get(&(name.clone(), idx?)).copied()
            } else {
                env.scalars.get(name).copied()
            }
        }
        Expr::BinOp { op, left, right } => {
            let (l, r) = (eval(left, env, idx)?, eval(right, env, idx)?);
            match op {
                BinOpKind::Add => l.checked_add(r),
                BinOpKind::Sub => l.checked_sub(r),
                BinOpKind::Mul => l.checked_mul(r),
            }
        }
    }
}

fn holds(c: &Comparator, l: i64, r: i64) -> bool {
    match c {
        Comparator::Le => l <= r,
        Comparator::Lt => l < r,
        Comparator::Ge => l >= r,
        Comparator::Gt => l > r,
        Comparator::Eq => l == r,
    }
}

fn expr_vars(e: &Expr, out: &mut Vec<String>) {
    match e {
        Expr::Var { name, .. } => out.push(name.clone()),
        Expr::BinOp { left, right, .. } => {
            expr_vars(left, out);
            expr_vars(right, out);
        }
        _ => {}
    }
}

/// First static occurrence of each variable, scanning the start symbol's
/// productions before the rest.
fn static_positions(g: &Grammar) -> HashMap<String, usize> {
    let mut order = Vec::new();
    let push = |name: &str, order: &mut Vec<String>| {
        if !order.iter().any(|n| n == name) {
            order.push(name.to_string());
        }
    };
    let prods = g
        .productions
        .iter()
        .filter(|p| p.lhs_name == START)
        .chain(g.productions.iter().filter(|p| p.lhs_name != START));
    for p in prods {
        for sym in &p.rhs {
            match sym {
                Symbol::Variable { name, .. } => push(name, &mut order),
                Symbol::NonterminalRef {
                    arg: Some(CounterArg::VarRef(name)),
                    ..
                } => push(name, &mut order),
                _ => {}
            }
        }
    }
    order.into_iter().enumerate().map(|(i, n)| (n, i)).collect()
}

/// The variable whose binding triggers each constraint: the statically last
/// one among its variables.
fn triggers(g: &Grammar) -> Vec<Option<String>> {
    let pos = static_positions(g);
    g.constraints
        .iter()
        .map(|c| {
            let mut vars = Vec::new();
            for e in &c.operands {
                expr_vars(e, &mut vars);
            }
            vars.into_iter()
                .filter(|v| pos.contains_key(v))
                .max_by_key(|v| pos[v])
        })
        .collect()
}

fn constraint_ok(c: &Constraint, env: &Env, idx: Option<i64>) -> bool {
    let values: Vec<Option<i64>> = c.operands.iter().map(|e| eval(e, env, idx)).collect();
    for (k, op) in c.ops.iter().enumerate() {
        if let (Some(l), Some(r)) = (values[k], values[k + 1]) {
            if !holds(op, l, r) {
                return false;
            }
        }
    }
    true
}

// ---- exhaustive derivation -------------------------------------------

struct Enumerator<'g> {
    grammar: &'g Grammar,
    triggers: Vec<Option<String>>,
    domain: std::ops::RangeInclusive<i64>,
    max_len: usize,
    cap: usize,
    results: BTreeSet<Vec<u8>>,
}

impl<'g> Enumerator<'g> {
    fn go(&mut self, stack: &mut Vec<(Symbol, Option<i64>)>, out: &mut Vec<u8>, env: &Env) {
        if self.results.len() >= self.cap || out.len() > self.max_len {
            return;
        }
        let Some((sym, ctx)) = stack.pop() else {
            self.results.insert(out.clone());
            return;
        };
        match &sym {
            Symbol::Terminal(t) => {
                out.extend_from_slice(t.as_bytes());
                self.go(stack, out, env);
                out.truncate(out.len() - t.len());
            }
            Symbol::Separator(kind) => {
                out.push(match kind {
                    SeparatorKind::Space => b' ',
                    SeparatorKind::Newline => b'\n',
                });
                self.go(stack, out, env);
                out.pop();
            }
            Symbol::Variable { name, indexed } => {
                for v in self.domain.clone() {
                    let mut env2 = env.clone();
                    if *indexed {
                        let Some(i) = ctx else { continue };
                        env2.indexed.insert((name.clone(), i), v);
                    } else {
                        env2.scalars.insert(name.clone(), v);
                    }
                    let ok = self
                        .grammar
                        .constraints
                        .iter()
                        .zip(&self.triggers)
                        .filter(|(_, t)| t.as_deref() == Some(name.as_str()))
                        .all(|(c, _)| constraint_ok(c, &env2, ctx));
                    if !ok {
                        continue;
                    }
                    let text = v.to_string();
                    out.extend_from_slice(text.as_bytes());
                    self.go(stack, out, &env2);
                    out.truncate(out.len() - text.len());
                }
            }
            Symbol::NonterminalRef { name, arg } => {
                let counter = match arg {
                    None => None,
                    Some(CounterArg::Same) => ctx,
                    Some(CounterArg::Decrement) => ctx.map(|c| c - 1),
                    Some(CounterArg::Const(v)) => Some(*v as i64),
                    Some(CounterArg::VarRef(var)) => env.scalars.get(var).copied(),
                };
                let prods: Vec<_> = self.grammar.productions_of(name).collect();
                for p in &prods {
                    let (applies, new_ctx) = match (&p.lhs_kind, counter) {
                        (LhsKind::Plain, None) => (true, ctx),
                        (LhsKind::Base(b), Some(c)) => (*b as i64 == c, Some(c)),
                        (LhsKind::CounterParam, Some(c)) => {
                            let min_base = prods
                                .iter()
                                .filter_map(|q| match q.lhs_kind {
                                    LhsKind::Base(b) => Some(b as i64),
                                    _ => None,
                                })
                                .min();
                            (min_base.is_some_and(|m| c > m), Some(c))
                        }
                        _ => (false, ctx),
                    };
                    if !applies {
                        continue;
                    }
                    // exact base match beats the recursive case
                    if matches!(p.lhs_kind, LhsKind::CounterParam)
                        && prods.iter().any(
                            |q| matches!(q.lhs_kind, LhsKind::Base(b) if Some(b as i64) == counter),
                        )
                    {
                        continue;
                    }
                    let depth = stack.len();
                    for sym in p.rhs.iter().rev() {
                        stack.push((sym.clone(), new_ctx));
                    }
                    self.go(stack, out, env);
                    stack.truncate(depth);
                }
            }
        }
        stack.push((sym, ctx));
    }
}

/// Every string of the language whose variables take values in `domain`
/// and whose length is at most `max_len`.
pub fn enumerate_language(
    g: &Grammar,
    domain: std::ops::RangeInclusive<i64>,
    max_len: usize,
    cap: usize,
) -> BTreeSet<Vec<u8>> {
    let mut e = Enumerator {
        grammar: g,
        triggers: triggers(g),
        domain,
        max_len,
        cap,
        results: BTreeSet::new(),
    };
    let mut stack = vec![(
        Symbol::NonterminalRef {
            name: START.to_string(),
            arg: None,
        },
        None,
    )];
    e.go(&mut stack, &mut Vec::new(), &Env::default());
    assert!(e.results.len() < cap, "enumeration hit the result cap");
    e.results
}

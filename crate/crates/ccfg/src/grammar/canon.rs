//! Canonical renaming for syntactic-equivalence comparison: two grammars
//! that differ only in variable or nonterminal naming canonicalize to the
//! same value.

use std::collections::BTreeMap;

use super::{
    assemble, constraint_variables, CounterArg, Expr, Grammar, LhsKind, Production, Symbol, START,
};

/// Renames variables to `v1, v2, ...` and nonterminals (other than the start
/// symbol) to `N1, N2, ...` in order of first appearance, then sorts
/// productions and constraints. Idempotent.
pub fn canonicalize(g: &Grammar) -> Grammar {
    let mut current = g.clone();
    // renaming changes the traversal that sorting keys off, so iterate to a
    // fixpoint
    for _ in 0..64 {
        let next = canonicalize_once(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

struct Renamer {
    vars: BTreeMap<String, String>,
    nts: BTreeMap<String, String>,
}

impl Renamer {
    fn var(&mut self, name: &str) -> String {
        if let Some(n) = self.vars.get(name) {
            return n.clone();
        }
        let fresh = format!("v{}", self.vars.len() + 1);
        self.vars.insert(name.to_string(), fresh.clone());
        fresh
    }

    fn nt(&mut self, name: &str) -> String {
        if name == START {
            return START.to_string();
        }
        if let Some(n) = self.nts.get(name) {
            return n.clone();
        }
        let fresh = format!("N{}", self.nts.len() + 1);
        self.nts.insert(name.to_string(), fresh.clone());
        fresh
    }
}

fn canonicalize_once(g: &Grammar) -> Grammar {
    let mut r = Renamer {
        vars: BTreeMap::new(),
        nts: BTreeMap::new(),
    };
    // fixed traversal: start productions first, then listed order
    let ordered: Vec<&Production> = g
        .productions
        .iter()
        .filter(|p| p.lhs_name == START)
        .chain(g.productions.iter().filter(|p| p.lhs_name != START))
        .collect();
    for p in &ordered {
        r.nt(&p.lhs_name);
        for sym in &p.rhs {
            match sym {
                Symbol::Variable { name, .. } => {
                    r.var(name);
                }
                Symbol::NonterminalRef { name, arg } => {
                    r.nt(name);
                    if let Some(CounterArg::VarRef(v)) = arg {
                        r.var(v);
                    }
                }
                _ => {}
            }
        }
    }
    // constraint-only variables come last, in constraint order
    for c in &g.constraints {
        for v in constraint_variables(c) {
            r.var(&v);
        }
    }

    let mut productions: Vec<Production> = ordered
        .into_iter()
        .map(|p| Production {
            lhs_name: r.nt(&p.lhs_name),
            lhs_kind: p.lhs_kind,
            rhs: p.rhs.iter().map(|s| rename_symbol(s, &mut r)).collect(),
        })
        .collect();
    productions.sort_by(|a, b| {
        (&a.lhs_name, lhs_kind_key(a.lhs_kind), rhs_key(a))
            .cmp(&(&b.lhs_name, lhs_kind_key(b.lhs_kind), rhs_key(b)))
    });

    let mut constraints: Vec<super::Constraint> = g
        .constraints
        .iter()
        .map(|c| super::Constraint {
            operands: c.operands.iter().map(|e| rename_expr(e, &mut r)).collect(),
            ops: c.ops.clone(),
        })
        .collect();
    constraints.sort_by_key(super::format_constraint);

    assemble(productions, constraints)
}

fn lhs_kind_key(kind: LhsKind) -> (u8, u64) {
    match kind {
        LhsKind::Plain => (0, 0),
        LhsKind::CounterParam => (1, 0),
        LhsKind::Base(v) => (2, v),
    }
}

fn rhs_key(p: &Production) -> String {
    p.rhs
        .iter()
        .map(super::format_symbol)
        .collect::<Vec<_>>()
        .join(" ")
}

fn rename_symbol(sym: &Symbol, r: &mut Renamer) -> Symbol {
    match sym {
        Symbol::Variable { name, indexed } => Symbol::Variable {
            name: r.var(name),
            indexed: *indexed,
        },
        Symbol::NonterminalRef { name, arg } => Symbol::NonterminalRef {
            name: r.nt(name),
            arg: arg.as_ref().map(|a| match a {
                CounterArg::VarRef(v) => CounterArg::VarRef(r.var(v)),
                other => other.clone(),
            }),
        },
        other => other.clone(),
    }
}

fn rename_expr(e: &Expr, r: &mut Renamer) -> Expr {
    match e {
        Expr::Var { name, indexed } => Expr::Var {
            name: r.var(name),
            indexed: *indexed,
        },
        Expr::BinOp { op, left, right } => Expr::BinOp {
            op: *op,
            left: Box::new(rename_expr(left, r)),
            right: Box::new(rename_expr(right, r)),
        },
        other => other.clone(),
    }
}

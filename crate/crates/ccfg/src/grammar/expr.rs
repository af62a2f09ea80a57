//! Exact integer evaluation of constraint expressions against bindings.

use std::collections::HashMap;

use super::{BinOpKind, Constraint, Expr};

/// One recorded binding event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BindingEntry {
    pub name: String,
    pub index: Option<i64>,
    pub value: i64,
}

/// Variable bindings accumulated during a derivation or parse.
///
/// Rebinding a scalar replaces its value for all subsequent constraint
/// evaluations; array entries are written at the counter value active at
/// bind time. The append-only log preserves binding order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bindings {
    scalars: HashMap<String, i64>,
    arrays: HashMap<String, HashMap<i64, i64>>,
    log: Vec<BindingEntry>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind_scalar(&mut self, name: &str, value: i64) {
        self.scalars.insert(name.to_string(), value);
        self.log.push(BindingEntry {
            name: name.to_string(),
            index: None,
            value,
        });
    }

    pub fn bind_indexed(&mut self, name: &str, index: i64, value: i64) {
        self.arrays
            .entry(name.to_string())
            .or_default()
            .insert(index, value);
        self.log.push(BindingEntry {
            name: name.to_string(),
            index: Some(index),
            value,
        });
    }

    pub fn scalar(&self, name: &str) -> Option<i64> {
        self.scalars.get(name).copied()
    }

    pub fn indexed(&self, name: &str, index: i64) -> Option<i64> {
        self.arrays.get(name).and_then(|m| m.get(&index)).copied()
    }

    pub fn log(&self) -> &[BindingEntry] {
        &self.log
    }

    /// Resolves a variable occurrence: indexed occurrences read the entry at
    /// `current_index`, scalar occurrences the most recent scalar value.
    pub fn resolve(&self, name: &str, indexed: bool, current_index: Option<i64>) -> Option<i64> {
        if indexed {
            self.indexed(name, current_index?)
        } else {
            self.scalar(name)
        }
    }

    pub fn has(&self, name: &str, indexed: bool, current_index: Option<i64>) -> bool {
        self.resolve(name, indexed, current_index).is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("arithmetic overflow evaluating `{0}`")]
    Overflow(String),
}

/// Evaluates an expression to an exact integer. Indexed variables resolve at
/// `current_index`.
pub fn eval_expr(e: &Expr, b: &Bindings, current_index: Option<i64>) -> Result<i128, EvalError> {
    match e {
        Expr::IntConst(v) => Ok(*v),
        Expr::Power { base, exponent } => base
            .checked_pow(*exponent)
            .ok_or_else(|| EvalError::Overflow(format!("{base}^{exponent}"))),
        Expr::Var { name, indexed } => b
            .resolve(name, *indexed, current_index)
            .map(i128::from)
            .ok_or_else(|| EvalError::UnboundVariable(name.clone())),
        Expr::BinOp { op, left, right } => {
            let l = eval_expr(left, b, current_index)?;
            let r = eval_expr(right, b, current_index)?;
            let out = match op {
                BinOpKind::Add => l.checked_add(r),
                BinOpKind::Sub => l.checked_sub(r),
                BinOpKind::Mul => l.checked_mul(r),
            };
            out.ok_or_else(|| EvalError::Overflow(super::format_expr(e)))
        }
    }
}

/// Checks a whole chain under complete bindings.
pub fn check_constraint(
    c: &Constraint,
    b: &Bindings,
    current_index: Option<i64>,
) -> Result<bool, EvalError> {
    let mut prev = eval_expr(&c.operands[0], b, current_index)?;
    for (op, operand) in c.ops.iter().zip(c.operands.iter().skip(1)) {
        let next = eval_expr(operand, b, current_index)?;
        if !op.holds(prev, next) {
            return Ok(false);
        }
        prev = next;
    }
    Ok(true)
}

/// True when every variable the chain mentions is currently bound.
pub fn constraint_fully_bound(c: &Constraint, b: &Bindings, current_index: Option<i64>) -> bool {
    c.operands.iter().all(|e| expr_fully_bound(e, b, current_index))
}

fn expr_fully_bound(e: &Expr, b: &Bindings, current_index: Option<i64>) -> bool {
    match e {
        Expr::IntConst(_) | Expr::Power { .. } => true,
        Expr::Var { name, indexed } => b.has(name, *indexed, current_index),
        Expr::BinOp { left, right, .. } => {
            expr_fully_bound(left, b, current_index) && expr_fully_bound(right, b, current_index)
        }
    }
}

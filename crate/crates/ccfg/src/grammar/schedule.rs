//! Static derivation-order scheduling of constraint checks.
//!
//! Scalars rebind once per counter iteration, so a chain like `1<=k<=n` must
//! be evaluated exactly when the iteration's last-bound variable (`k`) binds;
//! evaluating it when `n` rebinds would pair the new `n` with the previous
//! iteration's `k`. The schedule fixes, per chain, the variable whose binding
//! triggers the check, and which operands may bound a variable at sample
//! time (only those bound earlier in derivation order).

use std::collections::HashMap;

use super::{constraint_variables, expr_variables, Expr, Grammar, Symbol, START};

#[derive(Debug, Clone)]
pub struct ConstraintSchedule {
    /// First static binding position of each variable.
    positions: HashMap<String, (usize, usize)>,
    /// Per constraint: the chain variable bound last in static order.
    triggers: Vec<Option<String>>,
}

impl ConstraintSchedule {
    pub fn new(g: &Grammar) -> Self {
        let positions = static_binding_positions(g);
        let triggers = g
            .constraints
            .iter()
            .map(|c| {
                constraint_variables(c)
                    .into_iter()
                    .filter(|v| positions.contains_key(v))
                    .max_by_key(|v| positions[v])
            })
            .collect();
        ConstraintSchedule {
            positions,
            triggers,
        }
    }

    /// Whether the binding of `name` triggers the check of constraint `ci`.
    pub fn is_trigger(&self, ci: usize, name: &str) -> bool {
        self.triggers[ci].as_deref() == Some(name)
    }

    /// Whether `operand` may bound `target` at sample time: all of its
    /// variables bind strictly before `target` in static order.
    pub fn usable_bound(&self, operand: &Expr, target: &str) -> bool {
        let Some(&target_pos) = self.positions.get(target) else {
            return false;
        };
        let mut vars = Vec::new();
        expr_variables(operand, &mut vars);
        vars.iter().all(|v| {
            self.positions
                .get(v)
                .map(|&p| p < target_pos)
                .unwrap_or(false)
        })
    }
}

/// First occurrence of each variable in a fixed walk: start productions
/// first, then the rest in listed order, rhs left-to-right.
pub(crate) fn static_binding_positions(g: &Grammar) -> HashMap<String, (usize, usize)> {
    let mut positions = HashMap::new();
    let ordered = g
        .productions
        .iter()
        .filter(|p| p.lhs_name == START)
        .chain(g.productions.iter().filter(|p| p.lhs_name != START));
    for (pos, p) in ordered.enumerate() {
        for (sym_pos, sym) in p.rhs.iter().enumerate() {
            if let Symbol::Variable { name, .. } = sym {
                positions.entry(name.clone()).or_insert((pos, sym_pos));
            }
        }
    }
    positions
}

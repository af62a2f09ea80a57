//! Shared test fixtures.

use crate::grammar::{load_grammar, Grammar};

pub fn grammar_from(lines: &[&str], constraints: &[&str]) -> Grammar {
    let g: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
    let c: Vec<String> = constraints.iter().map(|s| s.to_string()).collect();
    match load_grammar(&g, &c) {
        Ok(g) => g,
        Err(errs) => panic!("fixture failed to load: {errs:?}"),
    }
}

/// The t-blocks grammar: `t` test cases, each `n k`, a line of `n` values
/// and a line of `k` values.
pub fn example_blocks() -> Grammar {
    grammar_from(
        &[
            "<S> -> t <n> <T_t>",
            "<T_i> -> <T_i-1> <n> n <s> k <n> <L_n> <n> <Z_k>",
            "<T_1> -> n <s> k <n> <L_n> <n> <Z_k>",
            "<L_i> -> <L_i-1> <s> a_i",
            "<L_1> -> a_i",
            "<Z_i> -> <Z_i-1> <s> b_i",
            "<Z_1> -> b_i",
        ],
        &["1<=t<=100", "1<=k<=n<=100", "1<=a_i<=100", "1<=b_i<=100"],
    )
}

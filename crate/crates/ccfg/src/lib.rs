//! Grammar-driven test case generation and evaluation for competitive
//! programming, built around context-free grammars with counters.

pub mod bundle;
pub mod fuzzer;
pub mod generator;
pub mod validator;
pub mod grammar;
pub mod metrics;
pub mod pipeline;
pub mod runner;
pub mod seed;
#[doc(hidden)]
pub mod testutil;

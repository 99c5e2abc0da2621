//! Library surface of the CLI: the evaluation harness, reused by the
//! acceptance suite.

pub mod evaluate;

#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Configuration, orchestration and verification behind the `zeno` binary.

pub mod config;
pub mod plot;
pub mod runner;
pub mod verify;

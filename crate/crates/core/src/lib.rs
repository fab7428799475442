#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Quantum Zeno and anti-Zeno effective decay rates of spin-boson systems,
//! computed with the hierarchical equations of motion and checked against
//! exact pure-dephasing results.

pub mod bath;
pub mod linalg;
pub mod models;
pub mod numeric;
pub mod oracle;
pub mod quadrature;
pub mod heom;
pub mod zeno;
pub mod infoflow;

//! Ready-made languages, analyses and rule sets.
//!
//! - [`math`]: arithmetic over integers and symbols with constant folding.
//! - [`lambda`]: a lambda calculus partial evaluator using explicit
//!   substitution, a free-variable analysis and capture-avoiding rewrites.

pub mod lambda;
pub mod math;

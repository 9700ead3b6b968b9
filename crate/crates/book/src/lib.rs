//! Compiles every code listing in the guide as a doctest, one module per
//! chapter so failures point at the right file.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}
#[doc = include_str!("../../../book/src/egraphs.md")]
mod egraphs {}
#[doc = include_str!("../../../book/src/rebuilding.md")]
mod rebuilding {}
#[doc = include_str!("../../../book/src/analyses.md")]
mod analyses {}
#[doc = include_str!("../../../book/src/rewriting.md")]
mod rewriting {}
#[doc = include_str!("../../../book/src/extraction.md")]
mod extraction {}
#[doc = include_str!("../../../book/src/lambda.md")]
mod lambda {}
#[doc = include_str!("../../../book/src/benchmarks.md")]
mod benchmarks {}

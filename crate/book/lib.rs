//! The guide's chapters, compiled so their listings run as doc-tests.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/fock.md")]
pub mod chapter1_fock {}
#[doc = include_str!("src/model.md")]
pub mod chapter2_model {}
#[doc = include_str!("src/floquet.md")]
pub mod chapter3_floquet {}
#[doc = include_str!("src/metrics.md")]
pub mod chapter4_metrics {}
#[doc = include_str!("src/preparation.md")]
pub mod chapter5_preparation {}
#[doc = include_str!("src/noise.md")]
pub mod chapter6_noise {}
#[doc = include_str!("src/experiments.md")]
pub mod chapter7_experiments {}

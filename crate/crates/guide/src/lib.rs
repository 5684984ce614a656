//! The chapters of the guide, compiled so `cargo test` runs their snippets.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/strong-form.md")]
pub mod strong_form {}

#[doc = include_str!("../../../book/src/weak-form.md")]
pub mod weak_form {}

#[doc = include_str!("../../../book/src/scalar-analysis.md")]
pub mod scalar_analysis {}

#[doc = include_str!("../../../book/src/generic-models.md")]
pub mod generic_models {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

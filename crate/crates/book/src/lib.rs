//! The chapters of `book/` as modules, so that `cargo test --doc` compiles and
//! runs every listing in the guide. One module per chapter keeps failures
//! traceable to their source file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/click-model.md")]
pub mod click_model {}

#[doc = include_str!("../../../book/src/interventions.md")]
pub mod interventions {}

#[doc = include_str!("../../../book/src/estimators.md")]
pub mod estimators {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}

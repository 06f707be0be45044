//! mdbook cannot build snippets against workspace crates, so each chapter
//! is pulled in here as module docs and `cargo test --doc` runs its
//! listings.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/valuation.md")]
pub mod valuation {}
#[doc = include_str!("../../../book/src/extrapolation.md")]
pub mod extrapolation {}
#[doc = include_str!("../../../book/src/selection.md")]
pub mod selection {}
#[doc = include_str!("../../../book/src/active-loop.md")]
pub mod active_loop {}
#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

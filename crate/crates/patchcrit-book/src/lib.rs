//! Doc-test harness for the guide in `book/`.
//!
//! Each chapter of the mdbook guide is attached below as the documentation
//! of an empty module, so every Rust code block in the book compiles and
//! runs under `cargo test`. If a chapter example drifts from the
//! `patchcrit` API or its numerical behaviour, the build breaks here —
//! the book cannot go stale silently.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/kinetics.md")]
pub mod kinetics {}

#[doc = include_str!("../../../book/src/domains.md")]
pub mod domains {}

#[doc = include_str!("../../../book/src/eigenvalues.md")]
pub mod eigenvalues {}

#[doc = include_str!("../../../book/src/thresholds.md")]
pub mod thresholds {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

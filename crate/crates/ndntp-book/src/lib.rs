//! Doc-test shim for the guide in `book/`.
//!
//! mdbook renders the chapters but cannot compile their snippets against
//! this workspace, so each chapter is also included here as a doc comment
//! and `cargo test --doc -p ndntp-book` runs every code block. A module per
//! chapter keeps failures attributable to the right file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/names.md")]
pub mod names {}

#[doc = include_str!("../../../book/src/clock-math.md")]
pub mod clock_math {}

#[doc = include_str!("../../../book/src/forwarding.md")]
pub mod forwarding {}

#[doc = include_str!("../../../book/src/strategies.md")]
pub mod strategies {}

#[doc = include_str!("../../../book/src/endpoints.md")]
pub mod endpoints {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}

//! Runs every code block in the guide (`book/src/`) as a doc-test, so the
//! book cannot drift from the API. One module per chapter keeps failures
//! attributable.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/curves.md")]
mod curves {}

#[doc = include_str!("../../../book/src/offsets.md")]
mod offsets {}

#[doc = include_str!("../../../book/src/lanes.md")]
mod lanes {}

#[doc = include_str!("../../../book/src/scenes.md")]
mod scenes {}

#[doc = include_str!("../../../book/src/evaluation.md")]
mod evaluation {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}

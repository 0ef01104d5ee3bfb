//! The guide in `book/src`, compiled so its snippets run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/grids.md")]
pub mod grids {}

#[doc = include_str!("../../../book/src/beliefs.md")]
pub mod beliefs {}

#[doc = include_str!("../../../book/src/information-gain.md")]
pub mod information_gain {}

#[doc = include_str!("../../../book/src/joint-search.md")]
pub mod joint_search {}

#[doc = include_str!("../../../book/src/bubbles.md")]
pub mod bubbles {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../../book/src/validation.md")]
pub mod validation {}

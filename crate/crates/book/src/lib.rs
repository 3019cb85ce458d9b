//! The guide's chapters, compiled so that `cargo test --doc` runs every code
//! block. One module per chapter keeps failures traceable.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}
#[doc = include_str!("../../../book/src/states.md")]
pub mod states {}
#[doc = include_str!("../../../book/src/symbols.md")]
pub mod symbols {}
#[doc = include_str!("../../../book/src/lattice.md")]
pub mod lattice {}
#[doc = include_str!("../../../book/src/wiener.md")]
pub mod wiener {}
#[doc = include_str!("../../../book/src/constraints.md")]
pub mod constraints {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

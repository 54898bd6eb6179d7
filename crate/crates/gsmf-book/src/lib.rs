//! The chapters of `book/` compiled as module docs, so `cargo test --doc`
//! runs every Rust listing in the guide. One module per chapter keeps
//! failures traceable to their page.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}
#[doc = include_str!("../../../book/src/operators.md")]
pub mod operators {}
#[doc = include_str!("../../../book/src/regularizers.md")]
pub mod regularizers {}
#[doc = include_str!("../../../book/src/relaxation.md")]
pub mod relaxation {}
#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}
#[doc = include_str!("../../../book/src/snmf.md")]
pub mod snmf {}
#[doc = include_str!("../../../book/src/diagnostics.md")]
pub mod diagnostics {}
#[doc = include_str!("../../../book/src/data.md")]
pub mod data {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

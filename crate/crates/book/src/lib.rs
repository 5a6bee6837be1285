//! Compiles the code listings in `book/` as doc-tests, since mdbook cannot
//! link against the workspace crates on its own.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}
#[doc = include_str!("../../../book/src/analytic.md")]
pub mod analytic {}
#[doc = include_str!("../../../book/src/master-equation.md")]
pub mod master_equation {}
#[doc = include_str!("../../../book/src/sweeps.md")]
pub mod sweeps {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

//! P1 finite elements for sphere-valued heat flow and Landau-Lifshitz-Gilbert
//! dynamics with a nodal unit-length constraint. See the guide in `book/`.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod assembly;
pub mod config;
pub mod error;
pub mod experiments;
pub mod linsolve;
pub mod mesh;
pub mod quadrature;
pub mod schemes;
pub mod sparse;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/meshes.md")]
    mod meshes {}
    #[doc = include_str!("../../../book/src/assembly.md")]
    mod assembly {}
    #[doc = include_str!("../../../book/src/saddle.md")]
    mod saddle {}
    #[doc = include_str!("../../../book/src/schemes.md")]
    mod schemes {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}

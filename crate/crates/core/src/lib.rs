//! Lightweight asymmetric autoencoder for compressing quantised IRS
//! phase-shift matrices, trained with model-agnostic meta-learning.
//!
//! * [`tensor`]: reverse-mode tensor engine with finite-difference checks.
//! * [`model`]: encoder/decoder assembly, parameter accounting, weight files.
//! * [`psi`]: phase quantisation, task generators, control channel, NMSE,
//!   dataset files.
//! * [`meta`]: Adam, MAML inner/outer loops, joint-training baseline.
//!
//! The guide in `book/` walks through each piece; its code listings are
//! compiled as doctests of this crate.

pub mod error;
pub mod meta;
pub mod model;
pub mod psi;
pub mod seed;
pub mod tensor;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/tensors.md")]
    mod tensors {}
    #[doc = include_str!("../../../book/src/architecture.md")]
    mod architecture {}
    #[doc = include_str!("../../../book/src/psi.md")]
    mod psi {}
    #[doc = include_str!("../../../book/src/meta.md")]
    mod meta {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

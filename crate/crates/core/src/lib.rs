//! Gaussian-process Bayesian optimization on finite grids: GP-EIMS and
//! baseline acquisition rules, synthetic regret experiments and numerical
//! checks of the regret analysis. The guide in `book/` walks through each
//! module; its code blocks run as doctests.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisitions;
pub mod driver;
pub mod error;
pub mod experiment;
pub mod gaussmath;
pub mod gp;
pub mod kernels;
mod linalg;
pub mod points;
pub mod sampling;
pub mod seeds;
pub mod synthetic;
pub mod theory;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/gaussian.md")]
    mod gaussian {}
    #[doc = include_str!("../../../book/src/gp.md")]
    mod gp {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/acquisitions.md")]
    mod acquisitions {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/theory.md")]
    mod theory {}
}

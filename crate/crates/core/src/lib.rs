//! Differentially private learning of Ising models, pairwise graphical
//! models over finite alphabets, and higher-order binary Markov random
//! fields.

pub mod dataset;
pub mod error;
pub mod harness;
pub mod learners;
pub mod models;
pub mod oracle;
pub mod pfw;
pub mod polynomial;
pub mod privacy;
pub mod query_release;
pub mod rng;
pub mod sampler;
pub mod structure;

pub use dataset::{Alphabet, Dataset};
pub use error::{Error, Result};
pub use models::{BinaryMRF, IsingModel, Model, PairwiseModel};
pub use polynomial::{MonomialIndex, MultilinearPolynomial};

// The guide's snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/privacy.md")]
    mod privacy {}
    #[doc = include_str!("../../../book/src/frank_wolfe.md")]
    mod frank_wolfe {}
    #[doc = include_str!("../../../book/src/learners.md")]
    mod learners {}
    #[doc = include_str!("../../../book/src/parities.md")]
    mod parities {}
    #[doc = include_str!("../../../book/src/structure.md")]
    mod structure {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}

pub mod binarizer;
pub mod data;
pub mod error;
pub mod laf;
pub mod model;
pub mod numerics;
pub mod persist;
pub mod rules;
pub mod trainer;

pub use error::{Result, RrlError};

// The guide in `book/` is compiled here so its snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/binarization.md")]
    mod binarization {}
    #[doc = include_str!("../../../book/src/logical-activations.md")]
    mod logical_activations {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/rules.md")]
    mod rules {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

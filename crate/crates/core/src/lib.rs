pub mod baselines;
pub mod error;
pub mod evaluation;
pub mod fusor;
pub mod meta_dataset;
pub mod meta_features;
pub mod synthetic;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/meta-features.md")]
    mod meta_features {}
    #[doc = include_str!("../../../book/src/meta-dataset.md")]
    mod meta_dataset {}
    #[doc = include_str!("../../../book/src/fusor.md")]
    mod fusor {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

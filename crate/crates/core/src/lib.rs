//! Interactive feature attributions: explain a model's prediction, let an
//! expert correct the explanation, and turn the correction into extra
//! training samples.
//!
//! The main entry points are [`attribution`] (occlusion and baseline
//! Shapley values), [`augmentation`] (samples from corrected
//! explanations), [`engine`] (the interactive loop) and [`experiment`]
//! (ready-made scenarios and the run matrix).

pub mod attribution;
pub mod augmentation;
pub mod config;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod expert;
pub mod models;
pub mod results;
pub mod rng;

pub use error::{Error, Result};

/// The guide's chapters, compiled as doc-tests so their snippets stay
/// runnable.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/attributions.md")]
    mod attributions {}
    #[doc = include_str!("../../../book/src/augmentation.md")]
    mod augmentation {}
    #[doc = include_str!("../../../book/src/loop.md")]
    mod interactive_loop {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
}

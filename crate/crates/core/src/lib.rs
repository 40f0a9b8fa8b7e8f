//! Neural signed distance field reconstruction from posed RGB images and
//! monocular normal priors, with a learned view-dependent rotation that
//! absorbs per-view bias in the priors.
//!
//! The pipeline runs synthetic scene generation ([`scene`]), dataset loading
//! ([`dataset`]), the hybrid geometry and head networks ([`fields`]), volume
//! rendering ([`render`]), edge-driven ray sampling ([`sampler`]), two-stage
//! optimization ([`train`]) and mesh extraction with metrics ([`mesh`]).
//! [`experiment`] strings these together for the bias and ablation runs.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod fields;
pub mod mesh;
pub mod render;
pub mod sampler;
pub mod scene;
pub mod train;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scenes.md")]
    mod scenes {}
    #[doc = include_str!("../../../book/src/fields.md")]
    mod fields {}
    #[doc = include_str!("../../../book/src/rendering.md")]
    mod rendering {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

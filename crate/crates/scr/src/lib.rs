//! Style-conditioned recommendations.
//!
//! A conditional variational autoencoder over implicit-feedback click data
//! whose condition is an interpretable per-user style profile learned
//! semi-supervised from item content. The crate covers the full pipeline:
//! dataset handling, the text encoder, the click VAE, style injection, and
//! the evaluation protocol, plus a CLI that orchestrates all of it.

pub mod checkpoint;
pub mod cli;
pub mod clickvae;
pub mod data;
mod error;
pub mod eval;
pub mod inject;
pub mod manifest;
pub mod nncore;
pub mod textenc;

pub use error::{Result, ScrError};

/// Scalar used by the CLI pipeline. The math in [`nncore`] and the models is
/// generic over [`nncore::Scalar`]; training defaults to double precision so
/// the gradient checks have headroom.
pub type Real = f64;

pub type Tensor = nncore::Tensor2<Real>;
pub type TextEncoder = textenc::TextEncoderModel<Real>;
pub type ClickVae = clickvae::ClickVaeModel<Real>;

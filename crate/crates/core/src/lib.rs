//! Zero-shot image classification from class text: knowledge-overlay text
//! semantics, a triplet-constrained feature GAN, semi-supervised pseudo-label
//! retraining, and the ZSL / GZSL / retrieval evaluation suite.

pub mod cko;
pub mod config;
pub mod data;
pub mod error;
pub mod gan;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod ssl;
pub mod text;
pub mod verify;

pub use error::{Error, Result};

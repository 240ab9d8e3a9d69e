//! Staged multi-modal fusion training.
//!
//! Modality-specific paths are pretrained on their own, then joined through
//! a block-structured shared layer that starts out as a normalized
//! geometric mean of the per-path posteriors. Cross-modality blocks are
//! released later and training continues with whole-modality dropout
//! (ModDrop) so the fused model degrades gracefully when channels go
//! missing. The crate also contains the skeleton pose descriptor, the
//! temporal scoring and localization pipeline, Jaccard evaluation, and the
//! MNIST "four quarters" experiment harness.

pub mod error;
pub mod harness;
pub mod network;
pub mod numerics;
pub mod skeleton;
pub mod temporal;
pub mod training;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testutil;

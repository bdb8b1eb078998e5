//! Hermite-spectral Galerkin reconstruction of the Grüneisen parameter and
//! the absorptive part of the electric susceptibility from combined
//! photoacoustic (PAT) and optical coherence (OCT) data.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod forward;
pub mod galerkin_1d;
pub mod galerkin_2d;
pub mod hermite;
pub mod phantom;
pub mod pipeline;
pub mod quadrature;
pub mod spectral;
pub mod tikhonov;

pub use error::{Error, Result};

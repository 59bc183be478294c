//! Core of the cascaded-CNN dehazing pipeline: a minimal dense tensor
//! engine with analytic backward passes, the atmospheric scattering model,
//! SSIM/MSE training losses, guided-filter refinement, the two-headed
//! network itself, and evaluation metrics.
//!
//! The crate is `no_std` (alloc only); file formats, image IO, and the CLI
//! live in the companion `dehaze-cli` crate.

#![no_std]

extern crate alloc;

pub mod adam;
mod boxsum;
pub mod error;
mod gemm;
pub mod guided;
pub mod losses;
pub mod metrics;
pub mod network;
pub mod ops;
pub mod scattering;
pub mod seed;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Real, Tensor};

//! Identity-preserving face super-resolution.
//!
//! A low-resolution face `y` is modeled as `y = S H x + n` (cyclic blur `H`,
//! decimation `S`). The high-resolution estimate is found by alternating a
//! closed-form frequency-domain data-fit step with an l1 sparse-coding step
//! over a dictionary of training faces, which pulls the result toward the
//! subspace of the subject it most resembles. The final sparse code doubles
//! as a sparse-representation classifier.
//!
//! Modules:
//! - [`imagecore`] and [`dictionary`]: images, dictionaries, file formats
//! - [`degrade`]: the forward model and dense test operators
//! - [`freqsolve`]: the FFT-domain data-fit solver
//! - [`sparse`]: l1-regularized least squares (monotone FISTA)
//! - [`halluc`]: the alternating solver and SRC classification
//! - [`metrics`]: PSNR, SSIM, neighborhood preservation rate
//! - [`align3d`]: landmark-driven 3D dictionary alignment

pub mod align3d;
pub mod degrade;
pub mod dictionary;
pub mod error;
mod fft;
pub mod freqsolve;
pub mod halluc;
pub mod imagecore;
pub mod metrics;
pub mod sparse;
pub mod synthetic;

pub use error::{Error, Result};
pub use imagecore::{Dims, Image, Mask};

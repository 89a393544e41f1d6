//! Iterative model-based tomographic reconstruction for edge-illumination
//! (EI) X-ray phase-contrast imaging.
//!
//! The crate is organised bottom-up:
//!
//! * [`projector`]: discrete Radon transform (lookup-table and on-the-fly
//!   variants), its exact adjoint, and the detector-axis derivative.
//! * [`illumination`]: flat-field illumination curves `f(t, m)` with periodic
//!   cubic interpolation.
//! * [`forward_model`]: the EI sample model
//!   `s(t,θ,m) = exp(-R[h]) · f(t, m - m_o(θ) - m_r(t) - zγ ∂_t R[h])`.
//! * [`solver`]: least-squares cost, analytic gradients and an L-BFGS
//!   minimiser.
//! * [`singleshot`]: the non-iterative retrieval plus filtered backprojection.
//! * [`simulate`]: phantoms, illumination-curve models and noisy scans.
//! * [`metrics`]: Fourier ring correlation, CNR and a ring-artifact score.
//!
//! No module here touches the filesystem; file formats and the command line
//! live in the companion `eitomo-cli` crate.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod forward_model;
pub mod illumination;
pub mod metrics;
pub mod projector;
pub mod simulate;
pub mod singleshot;
pub mod solver;

mod fft;

pub use error::{Error, Result};
pub use illumination::{IlluminationCurve, MeanCurve};
pub use projector::{Geometry, Image, LookupTable, OnTheFly, RadonOperator, Sinogram};
pub use forward_model::{ModelParams, ScanData};
pub use solver::{ReconResult, SolverConfig};

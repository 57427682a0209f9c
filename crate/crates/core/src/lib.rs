//! Classical information capacity of diffraction-limited optical channels.
//!
//! A propagation kernel (thin lens with circular pupil, free space, or an
//! empty hole in an absorbing screen) is discretised, decomposed by SVD into
//! parallel lossy bosonic modes, and a mean photon budget is spread across
//! those modes to maximise the coherent-state capacity.

pub mod capacity;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod mathfn;
pub mod scenarios;
pub mod spectra;

pub use error::{Error, Result};
pub use geometry::{OpticalGeometry, Regime, Scenario};
pub use spectra::ModeSpectrum;

//! Frequency-domain Gaussian noise model for EPR-entangled squeezed light.
//!
//! The crate propagates unit-variance vacuum fluctuations through a cascade
//! of optical elements (a non-degenerate OPO producing an entangled
//! signal/idler pair, a detuned two-field cavity, loss channels), assembles
//! the quadrature covariance spectrum, and projects it onto homodyne
//! readouts: single detectors, fixed electronic combinations, and the
//! per-frequency Wiener-optimal combination. Closed-form variance oracles,
//! a detection-loss fit, and the coherent-locking-field error signals live
//! in [`analysis`].
//!
//! Everything is evaluated pointwise on a [`FrequencyGrid`]; all types are
//! immutable after construction and safe to share across threads.

pub mod analysis;
pub mod elements;
pub mod error;
pub mod grid;
pub mod readout;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{FrequencyGrid, GridScale};
pub use spectral::{
    covariance_from_ports, Mat2, Mat4, NoisePort, NoisePortSet, QuadratureTransfer,
    SpectralCovariance,
};

pub use num_complex::Complex64;

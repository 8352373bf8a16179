//! Ptychographic phase retrieval.
//!
//! Simulates far-field diffraction amplitudes `a = |F Q ψ|` of a complex
//! object scanned by a known lens, and reconstructs the object with
//! alternating projections, RAAR, frame-synchronized RAAR and conjugate
//! gradients, optionally started from spectral phase-synchronization
//! initializers. Also ships executable versions of the convergence theory
//! (objective, gradient, Hessian form, residual branches) for property tests.
//!
//! Conventions: 0-based row-major indexing, unitary DFT with positive
//! exponent, DC at index `(0, 0)`.

pub mod error;
pub mod fft;
pub mod forward;
pub mod grid;
pub mod io;
pub mod lens;
pub mod metrics;
pub mod projectors;
pub mod scheme;
pub mod solvers;
pub mod spectral;
pub mod theory;
pub mod verify;

pub use error::{Error, Result};
pub use fft::{dft2, Direction};
pub use forward::{add_noise, ForwardModel, NoiseSpec};
pub use grid::{index_ell, index_linear, ComplexGrid, FrameStack, MeasurementStack, C64};
pub use scheme::{build_scheme, shifted_probe, validate_scheme, IlluminationScheme, Position, RasterSpec};

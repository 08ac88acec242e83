//! Numerical and closed-form engine for the anisotropic quantum Rabi model
//! with a nonlinear Stark term,
//!
//! ```text
//! H = ω a†a + (Ω/2) σx + χ ω n̂ σx + g [(σ̃₋a† + σ̃₊a) + λ (σ̃₊a† + σ̃₋a)],
//! ```
//!
//! where σ̃± = (σz ∓ iσy)/2 raise and lower on the σx eigenbasis.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: parameters, validation and characteristic scales.
//! * [`fock`]: truncated Fock ⊗ spin matrices and the parity-sector split.
//! * [`eigensolve`]: dense and tridiagonal symmetric eigensolvers plus the
//!   self-converging ground-state solve.
//! * [`observables`]: ground-state expectation values bundled per point.
//! * [`wavefunction`]: Hermite synthesis in quadrature space, node counting,
//!   peak ratio ζ and the interaction-energy decomposition.
//! * [`analytic`]: Jaynes–Cummings–Stark levels, semiclassical energies,
//!   phase boundaries, scaling laws and topological quadruple points.
//! * [`sweep`]: parameter-plane sweeps, boundary extraction and scaling
//!   collapse datasets.
//! * [`table`]: CSV/JSON serialization of every dataset.

pub mod analytic;
pub mod eigensolve;
mod error;
pub mod fock;
pub mod model;
pub mod observables;
pub mod sweep;
pub mod table;
pub mod wavefunction;

pub use error::{Error, Result};
pub use model::{DerivedScales, ModelParams};

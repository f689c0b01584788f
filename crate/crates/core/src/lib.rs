//! Tight minimum-sidelobe windows for the discrete Gabor transform.
//!
//! A window is *tight* for a painless Gabor system (hop `a` < window length
//! `K` ≤ channels `M`) when every residue class of its taps modulo `a` carries
//! the same energy. Among all tight windows, the one with the smallest energy
//! outside a mainlobe band `[-p/2, p/2]` is found by Newton's method on the
//! product of spheres that the tightness constraint carves out.
//!
//! Crate layout:
//!
//! - [`gabor`]: forward/inverse DGT, frame-operator diagonal, tightness tests
//!   and the canonical tight projection.
//! - [`spectral`]: the sinc concentration matrix, the Slepian window and
//!   spectral metrics.
//! - [`oblique`]: block permutation and Riemannian geometry of the constraint
//!   set, including the Newton step.
//! - [`solver`]: the Newton loop, initialization and warm-started sweeps.
//! - [`formats`]: on-disk window, spectrum, trace and metrics formats.

pub mod accurate;
pub mod error;
pub mod formats;
pub mod gabor;
pub mod oblique;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use gabor::{GaborCoefficients, GaborParams, Tightness, Window};
pub use oblique::{NewtonSystem, SortedWindow, TangentVector};
pub use solver::{Solution, SolverConfig, SolverStatus, SolverTrace, SweepEntry};
pub use spectral::{ConcentrationMatrix, SpectrumSamples};

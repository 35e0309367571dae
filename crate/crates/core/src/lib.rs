//! Imaginary-time current correlators and their curvature at the thermal
//! midpoint.
//!
//! The crate is organised bottom-up:
//!
//! - [`bloch`]: closed-form two-band lattice Hamiltonians `H(k) = d(k)·σ`.
//! - [`geometry`]: quantum metric, Berry curvature, Chern numbers and the
//!   Brillouin-zone mesh ([`geometry::BandGrid`]) feeding every band sum.
//! - [`matsubara`]: spectral densities, hyperbolic kernels, imaginary-time
//!   correlators and (alternating) Matsubara resummation.
//! - [`bounds`]: the midpoint curvature `ρ₀`, the universal supremum bound
//!   and its higher-order analogues.
//! - [`mori`]: exact diagonalization of interacting spinless fermion rings,
//!   Kubo–Mori products and the Mori continued-fraction coefficients.
//! - [`cli`]: the `corrcurv` command-line front end.
//!
//! Natural units `ħ = k_B = e = 1` are used throughout.

pub mod bloch;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod matsubara;
pub mod mori;
pub mod numeric;

pub use error::{Error, Result};

//! Finsler p-Laplace problems on cylinders `Ω_ℓ = ℓω₁ × ω₂`.
//!
//! The crate is `no_std` with `alloc`; the `std` feature (on by default) only
//! switches the float math to the platform library and enables `std::error::Error`
//! on [`Error`]. The `parallel` feature runs element assembly on rayon.
//!
//! Layout:
//! - [`norms`]: Minkowski norm families `H`, gradients, duals, fluxes, and
//!   sampled checks of the norm identities.
//! - [`mesh`]: tensor-product Kuhn meshes of the cylinder and its cross-section.
//! - [`discrete`]: piecewise-linear energies, gradients and norms.
//! - [`solve`]: Dirichlet and Rayleigh-quotient minimizers, residuals, Picone check.
//! - [`fit`]: power and exponential decay fits.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
pub(crate) mod math;
pub mod sum;

pub mod discrete;
pub mod fit;
pub mod mesh;
pub mod norms;
pub mod solve;

pub use error::{Error, Result};

pub use discrete::{EnergyBreakdown, Field, Region};
pub use fit::{fit_rate, DecayModel, RateFit};
pub use mesh::{BoundaryKind, CrossSectionMesh, CylinderMesh, Interval, Mesh};
pub use norms::{NormFamily, NormSpec, ThetaBounds};
pub use solve::{EigenResult, SolveOptions, SolveResult};

//! Low-temperature Casimir interaction of a sphere or ball and a plane.
//!
//! The free energy of the fluctuating field between a sphere of radius `R`
//! and a plane at center distance `L` has the functional-determinant form
//! `Tr ln(1 - M)` over one round trip of scattering. Expanding the
//! round-trip matrix at small frequency yields the two leading odd trace
//! coefficients `N1(rho)`, `N3(rho)` (`rho = R/L`), which carry the `T^2`
//! and `T^4` terms of the low-temperature free energy and force.
//!
//! The crate provides:
//! - truncated power-series arithmetic over configurable-precision
//!   coefficients ([`series`], [`scalar`]),
//! - exact Wigner 3j symbols and translation factors ([`wigner`]),
//! - modified spherical Bessel functions ([`bessel`]),
//! - T-matrix factors for Dirichlet/Neumann/conductor/dielectric/plasma
//!   spheres ([`scattering`]),
//! - balanced per-m matrix expansion ([`assembly`]),
//! - trace extraction, thermal corrections, small-separation and
//!   large-separation fits ([`lowtemp`]),
//! - an independent finite-frequency cross-check ([`oracle`]).

pub mod assembly;
pub mod bessel;
pub mod error;
pub mod linalg;
pub mod lowtemp;
pub mod oracle;
pub mod precision;
pub mod scalar;
pub mod scattering;
pub mod series;
pub mod wigner;

pub use assembly::{assemble_block, BlockExpansion, Geometry};
pub use error::{Error, Result};
pub use lowtemp::{
    asymptotic_check, c_coefficients, convergence_sweep, force_correction,
    free_energy_correction, n_coefficients, CCoefficients, FitTarget, LowTResult,
};
pub use oracle::{low_t_consistency_check, ConsistencyReport};
pub use scalar::{Mode, Scalar};
pub use scattering::{BoundarySpec, Field, PlaneBoundary, Polarization, SphereBoundary};
pub use series::Series;

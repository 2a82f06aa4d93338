//! Sensing-space analysis of continuous-aperture antennas.
//!
//! A large intelligent surface occupying a curve, surface or volume `M`
//! senses fields whose wavevector spectrum lives on the sphere `‖k‖ = κ`.
//! Fields that are both space-limited to `M` and sphere-bandlimited are
//! described by the eigenfunctions of the concentration operator
//!
//! ```text
//! ∫_M K(r, r′) ψ(r′) dr′ = λ ψ(r),    K(r, r′) = (2/β²) sinc(κ‖r − r′‖)
//! ```
//!
//! This crate discretizes that operator with a Nyström rule over a
//! [`SampledManifold`], solves the dense symmetric eigenproblem, and derives
//! degrees of freedom, far-field spectra and a line-of-sight channel
//! comparison between Slepian and Fourier expansions.

pub mod channel;
pub mod eigen;
mod error;
pub mod geometry;
pub mod kernel;
pub mod mesh;
pub mod spectrum;

pub use eigen::{
    dof_numerical, dof_sweep, dof_theoretical, solve, solve_eigenvalues, ConcentrationSpectrum,
    DofReport,
};
pub use error::{Error, Result};
pub use geometry::{
    build_manifold, GeometryKind, GeometrySpec, Point3, QuadratureRule, SampledManifold,
};
pub use kernel::{assemble, kernel_value, sinc, ConcentrationOperator, Wavenumber};
pub use mesh::load_custom_mesh;
pub use spectrum::{
    far_field, plancherel_check, plane_wave_fit, sphere_grid, FarFieldPattern, SphereGrid,
};

//! Numerical laboratory for classical ensembles that relax onto quantum
//! density matrices.
//!
//! Phase-space distributions are rewritten in doubled coordinates, expanded
//! over a spectral eigenbasis, and evolved under the antisymmetric coupling
//! superoperator with dissipation and a nonlinear source whose closed form
//! drags every ensemble onto a rank-1 projector. A separate module implements
//! the deterministic eigenvalue flows whose fixed points carry quantum
//! energy phases.

pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod ode;
pub mod phasespace;
pub mod potential;
pub mod prequantum;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::SpatialGrid;
pub use potential::Potential;
pub use spectral::{build_basis, evaluate_potential, BasisTag, SpectralBasis};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

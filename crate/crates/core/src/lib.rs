//! Dynamics of the split solvable groups `R^N ⋊_A R` and their lattices
//! `Z^N ⋊_B Z` acting on complex projective space.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: dense matrix kernels (exponential, real logarithm,
//!   hyperbolic splitting, Lyapunov solve, exact integer matrices).
//! * [`group`]: the semidirect product, its matrix representation, the affine
//!   and projective actions and the adjoint analysis.
//! * [`regions`]: stable spheres, the maps `ψ±`, and the classification of
//!   points into the discontinuity regions `Ω±` and the limit set `Λ`.
//! * [`dynamics`]: lattice certificates, isotropy fixed points, torus orbits
//!   and the boundedness scan of `‖(I − Bⁿ)⁻¹‖`.

pub mod dynamics;
pub mod error;
pub mod group;
pub mod linalg;
pub mod regions;

pub use error::{Error, Result};

/// Complex scalar used for chart points and spectra.
pub type Complex = nalgebra::Complex<f64>;
/// Dense real matrix.
pub type RealMatrix = nalgebra::DMatrix<f64>;
/// Dense real vector.
pub type RealVector = nalgebra::DVector<f64>;
/// Dense complex vector (points of the chart `C^N`).
pub type ComplexVector = nalgebra::DVector<Complex>;

//! Dense real/complex matrix kernels.

mod expm;
mod intmat;
mod logm;
mod lyapunov;
mod spectrum;

pub use expm::expm;
pub use intmat::{int_det_and_power, IntMatrix};
pub use logm::{logm, RealLog};
pub use lyapunov::solve_lyapunov;
pub use spectrum::{
    eigen_split, eigenvalues, spectral_radius, Mode, SpectralSplit, SpectrumReport, Stability,
};

use nalgebra::{ComplexField, DMatrix};

use crate::{Error, RealMatrix, Result};

/// Default hyperbolicity tolerance, relative to the spectral radius.
pub const DEFAULT_HYPERBOLIC_TOL: f64 = 1e-9;

pub(crate) fn ensure_finite(a: &RealMatrix) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub(crate) fn ensure_square(a: &RealMatrix) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if a.nrows() == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    Ok(a.nrows())
}

/// Maximum absolute column sum.
pub(crate) fn norm1(a: &RealMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn inverse(a: &RealMatrix) -> Result<RealMatrix> {
    a.clone().try_inverse().ok_or(Error::NotInvertible)
}

/// Operator 2-norm (largest singular value) of a real or complex matrix.
pub fn operator_norm<T>(a: &DMatrix<T>) -> Result<f64>
where
    T: ComplexField<RealField = f64>,
{
    if a.iter().any(|x| !x.clone().is_finite()) {
        return Err(Error::NonFinite);
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.singular_values().max())
}

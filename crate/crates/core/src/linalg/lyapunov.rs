//! Lyapunov equation `P·M + Mᵀ·P = −I` through the Kronecker-vectorised
//! `N² × N²` system. Dense and O(N⁶), meant for N ≲ 12.

use super::{eigenvalues, ensure_finite, ensure_square};
use crate::{Error, RealMatrix, Result};

/// Condition estimates beyond this are rejected.
const MAX_CONDITION: f64 = 1e12;

/// Solves `P·M + Mᵀ·P = −I` for the symmetric positive definite `P`.
pub fn solve_lyapunov(m: &RealMatrix) -> Result<RealMatrix> {
    let n = ensure_square(m)?;
    ensure_finite(m)?;
    if eigenvalues(m)?.iter().any(|l| l.re >= 0.0) {
        return Err(Error::NotStable);
    }

    // vec(P·M) = (Mᵀ ⊗ I) vec(P),  vec(Mᵀ·P) = (I ⊗ Mᵀ) vec(P)   (column-major vec)
    let ident = RealMatrix::identity(n, n);
    let mt = m.transpose();
    let system = mt.kronecker(&ident) + ident.kronecker(&mt);
    let rhs = nalgebra::DVector::from_iterator(
        n * n,
        (0..n * n).map(|k| if k % (n + 1) == 0 { -1.0 } else { 0.0 }),
    );

    let sv = system.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::ConditioningFailure { condition });
    }

    let x = system
        .lu()
        .solve(&rhs)
        .ok_or(Error::ConditioningFailure { condition })?;
    let p = RealMatrix::from_column_slice(n, n, x.as_slice());
    let p = (&p + p.transpose()) * 0.5;
    if p.clone().symmetric_eigenvalues().min() <= 0.0 {
        return Err(Error::NotStable);
    }
    Ok(p)
}

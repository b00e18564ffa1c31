//! Real matrix logarithm with the squared-matrix fallback.
//!
//! A real matrix without eigenvalues on the closed negative real axis has a
//! real principal logarithm. Otherwise we try `B²`, which always has one
//! when `B` has no purely imaginary eigenvalues.

use super::{eigenvalues, ensure_finite, ensure_square, expm, inverse, norm1, operator_norm};
use crate::{Error, RealMatrix, Result};

/// A real logarithm `M` of `B^power`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealLog {
    pub log: RealMatrix,
    /// 1 when `exp(M) = B`, 2 when `exp(M) = B²`.
    pub power: u8,
}

/// Finds a real `M` with `exp(M) = B` or, failing that, `exp(M) = B²`.
pub fn logm(b: &RealMatrix) -> Result<RealLog> {
    ensure_square(b)?;
    ensure_finite(b)?;
    let scale = operator_norm(b)?;
    let smallest = b.singular_values().min();
    if scale == 0.0 || smallest <= 1e-14 * scale {
        return Err(Error::NotInvertible);
    }

    let squared = b * b;
    for (target, power) in [(b.clone(), 1u8), (squared, 2u8)] {
        if has_negative_real_eigenvalue(&target)? {
            continue;
        }
        let Ok(log) = principal_log(&target) else {
            continue;
        };
        let back = expm(&log, 1.0)?;
        let resid = (&back - &target).norm() / target.norm().max(1.0);
        if resid <= 1e-8 && log.iter().all(|x| x.is_finite()) {
            return Ok(RealLog { log, power });
        }
    }
    Err(Error::NoRealLogarithm)
}

fn has_negative_real_eigenvalue(a: &RealMatrix) -> Result<bool> {
    let eig = eigenvalues(a)?;
    let radius = eig.iter().map(|l| l.norm()).fold(0.0, f64::max);
    Ok(eig
        .iter()
        .any(|l| l.re < 0.0 && l.im.abs() <= 1e-10 * radius))
}

/// Principal logarithm by inverse scaling and squaring: take square roots
/// until close to the identity, sum the `atanh` series, scale back.
fn principal_log(a: &RealMatrix) -> Result<RealMatrix> {
    let n = a.nrows();
    let ident = RealMatrix::identity(n, n);
    let mut x = a.clone();
    let mut roots = 0u32;
    while norm1(&(&x - &ident)) > 0.25 {
        if roots >= 64 {
            return Err(Error::NoConvergence("repeated square roots"));
        }
        x = sqrtm(&x)?;
        roots += 1;
    }
    // log(X) = 2 Σ Z^(2k+1)/(2k+1), Z = (X − I)(X + I)⁻¹
    let z = (&x - &ident) * inverse(&(&x + &ident))?;
    let z2 = &z * &z;
    let mut term = z.clone();
    let mut sum = z;
    for k in 1..80 {
        term = &term * &z2;
        let add = &term / (2 * k + 1) as f64;
        let small = norm1(&add) <= 1e-18 * norm1(&sum).max(1e-300);
        sum += add;
        if small {
            break;
        }
    }
    Ok(sum * 2f64.powi(roots as i32 + 1))
}

/// Principal square root by the product form of the Denman–Beavers
/// iteration.
fn sqrtm(a: &RealMatrix) -> Result<RealMatrix> {
    let n = a.nrows();
    let ident = RealMatrix::identity(n, n);
    let mut m = a.clone();
    let mut y = a.clone();
    for _ in 0..100 {
        let det = m.determinant().abs();
        let gamma = if det > 0.0 && det.is_finite() {
            det.powf(-1.0 / (2.0 * n as f64))
        } else {
            1.0
        };
        let m_scaled = &m * (gamma * gamma);
        let m_inv = inverse(&m_scaled)?;
        let y_next = &y * gamma * (&ident + &m_inv) * 0.5;
        let m_next = (&ident * 2.0 + &m_scaled + &m_inv) * 0.25;
        let done = norm1(&(&m_next - &ident)) <= 1e-15 * n as f64;
        y = y_next;
        m = m_next;
        if done {
            return Ok(y);
        }
    }
    Err(Error::NoConvergence("Denman-Beavers square root"))
}

//! Spectra and stable/unstable invariant subspaces of hyperbolic matrices.
//!
//! The spectral projectors come from the matrix sign function, computed by a
//! determinant-scaled Newton iteration. In discrete mode the unit circle is
//! first mapped onto the imaginary axis with the Cayley transform
//! `(B − I)⁻¹(B + I)`.

use nalgebra::Schur;

use super::{ensure_finite, ensure_square, inverse, norm1, operator_norm};
use crate::{Complex, Error, RealMatrix, Result};

/// How hyperbolicity is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Flow generator: forbidden locus is `Re λ = 0`.
    Continuous,
    /// Map: forbidden locus is `|λ| = 1`.
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub mode: Mode,
    /// Eigenvalues listed with multiplicity.
    pub eigenvalues: Vec<Complex>,
    pub classes: Vec<Stability>,
    /// Smallest distance of an eigenvalue to the forbidden locus.
    pub margin: f64,
}

impl SpectrumReport {
    pub fn stable_count(&self) -> usize {
        self.classes.iter().filter(|c| **c == Stability::Stable).count()
    }

    pub fn unstable_count(&self) -> usize {
        self.classes.len() - self.stable_count()
    }

    /// Distance of each eigenvalue to the forbidden locus (`Re λ = 0` or
    /// `|λ| = 1`).
    pub fn margins(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .map(|l| match self.mode {
                Mode::Continuous => l.re.abs(),
                Mode::Discrete => (l.norm() - 1.0).abs(),
            })
            .collect()
    }

    /// Distinct eigenvalues (clustered within `tol`) with their multiplicities.
    pub fn multiplicities(&self, tol: f64) -> Vec<(Complex, usize)> {
        let mut groups: Vec<(Complex, usize)> = Vec::new();
        for &l in &self.eigenvalues {
            match groups.iter_mut().find(|(c, _)| (c - l).norm() <= tol) {
                Some(g) => g.1 += 1,
                None => groups.push((l, 1)),
            }
        }
        groups
    }
}

/// Real bases and projections for `R^N = E^s ⊕ E^u`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSplit {
    /// Orthonormal basis of `E^s`, `N × N_s`.
    pub stable_basis: RealMatrix,
    /// Orthonormal basis of `E^u`, `N × N_u`.
    pub unstable_basis: RealMatrix,
    /// Projection onto `E^s` along `E^u`.
    pub proj_stable: RealMatrix,
    /// Projection onto `E^u` along `E^s`.
    pub proj_unstable: RealMatrix,
}

impl SpectralSplit {
    pub fn dim(&self) -> usize {
        self.proj_stable.nrows()
    }

    pub fn stable_dim(&self) -> usize {
        self.stable_basis.ncols()
    }

    pub fn unstable_dim(&self) -> usize {
        self.unstable_basis.ncols()
    }
}

/// Eigenvalues of `m` with multiplicity, from the real Schur form.
pub fn eigenvalues(m: &RealMatrix) -> Result<Vec<Complex>> {
    ensure_square(m)?;
    ensure_finite(m)?;
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 100_000)
        .ok_or(Error::NoConvergence("real Schur decomposition"))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

pub fn spectral_radius(m: &RealMatrix) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|l| l.norm()).fold(0.0, f64::max))
}

/// Classifies the spectrum of `m` and computes its stable/unstable splitting.
///
/// `tol` is relative to the spectral radius (to `max(1, ρ)` in discrete
/// mode); an eigenvalue within it of the forbidden locus is rejected as
/// [`Error::NotHyperbolic`].
pub fn eigen_split(m: &RealMatrix, mode: Mode, tol: f64) -> Result<(SpectrumReport, SpectralSplit)> {
    let report = classify_spectrum(m, mode, tol)?;
    let split = split_from_sign(m, mode, report.stable_count())?;
    Ok((report, split))
}

fn classify_spectrum(m: &RealMatrix, mode: Mode, tol: f64) -> Result<SpectrumReport> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol}")));
    }
    let mut eig = eigenvalues(m)?;
    let radius = eig.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let distance = |l: &Complex| match mode {
        Mode::Continuous => l.re.abs(),
        Mode::Discrete => (l.norm() - 1.0).abs(),
    };
    let cut = match mode {
        Mode::Continuous => tol * radius,
        Mode::Discrete => tol * radius.max(1.0),
    };
    let margin = eig.iter().map(distance).fold(f64::INFINITY, f64::min);
    if margin <= cut {
        return Err(Error::NotHyperbolic { margin });
    }
    let key = |l: &Complex| match mode {
        Mode::Continuous => l.re,
        Mode::Discrete => l.norm(),
    };
    eig.sort_by(|a, b| key(a).total_cmp(&key(b)).then(a.im.total_cmp(&b.im)));
    let classes = eig
        .iter()
        .map(|l| {
            let stable = match mode {
                Mode::Continuous => l.re < 0.0,
                Mode::Discrete => l.norm() < 1.0,
            };
            if stable {
                Stability::Stable
            } else {
                Stability::Unstable
            }
        })
        .collect();
    Ok(SpectrumReport {
        mode,
        eigenvalues: eig,
        classes,
        margin,
    })
}

/// Matrix sign function by scaled Newton iteration.
fn matrix_sign(x0: &RealMatrix) -> Result<RealMatrix> {
    let n = x0.nrows();
    let mut x = x0.clone();
    let mut scaling = true;
    for _ in 0..200 {
        let mu = if scaling {
            let det = x.determinant().abs();
            if det > 0.0 && det.is_finite() {
                det.powf(-1.0 / n as f64)
            } else {
                1.0
            }
        } else {
            1.0
        };
        let scaled = &x * mu;
        let next = (&scaled + inverse(&scaled)?) * 0.5;
        let change = norm1(&(&next - &x));
        let size = norm1(&next);
        x = next;
        if change <= 1e-2 * size {
            scaling = false;
        }
        if change <= 1e-14 * size {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence("matrix sign iteration"))
}

fn split_from_sign(m: &RealMatrix, mode: Mode, stable_dim: usize) -> Result<SpectralSplit> {
    let n = m.nrows();
    let ident = RealMatrix::identity(n, n);
    let sign_arg = match mode {
        Mode::Continuous => m.clone(),
        Mode::Discrete => inverse(&(m - &ident))? * (m + &ident),
    };
    let sign = matrix_sign(&sign_arg)?;
    let proj_s = (&ident - &sign) * 0.5;
    let proj_u = (&ident + &sign) * 0.5;
    let vs = range_basis(&proj_s, stable_dim);
    let vu = range_basis(&proj_u, n - stable_dim);

    let mut t = RealMatrix::zeros(n, n);
    t.columns_mut(0, stable_dim).copy_from(&vs);
    t.columns_mut(stable_dim, n - stable_dim).copy_from(&vu);
    let w = inverse(&t)?;
    let proj_stable = &vs * w.rows(0, stable_dim);
    let proj_unstable = &vu * w.rows(stable_dim, n - stable_dim);

    let scale = operator_norm(m)?.max(1.0);
    for basis in [&vs, &vu] {
        if basis.ncols() == 0 {
            continue;
        }
        let image = m * basis;
        let restricted = basis.transpose() * &image;
        let resid = &image - basis * restricted;
        let worst = resid.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
        if worst > 1e-9 * scale {
            return Err(Error::SplitResidual { residual: worst });
        }
    }

    Ok(SpectralSplit {
        stable_basis: vs,
        unstable_basis: vu,
        proj_stable,
        proj_unstable,
    })
}

/// Orthonormal basis for the `rank`-dimensional range of the projector `p`
/// by Gram–Schmidt with column pivoting (applied twice), with each column's
/// largest entry made positive.
fn range_basis(p: &RealMatrix, rank: usize) -> RealMatrix {
    let n = p.nrows();
    let mut basis = RealMatrix::zeros(n, rank);
    let mut work: Vec<_> = p.column_iter().map(|c| c.into_owned()).collect();
    for k in 0..rank {
        let pivot = (0..work.len())
            .max_by(|&a, &b| work[a].norm().total_cmp(&work[b].norm()))
            .expect("projector has columns");
        let mut v = work.swap_remove(pivot);
        for _ in 0..2 {
            for j in 0..k {
                let q = basis.column(j);
                let dot = q.dot(&v);
                v -= q * dot;
            }
        }
        v /= v.norm();
        let lead = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if lead < 0.0 {
            v = -v;
        }
        for w in &mut work {
            let dot = v.dot(w);
            *w -= &v * dot;
        }
        basis.set_column(k, &v);
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn cat() -> RealMatrix {
        RealMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0])
    }

    #[test]
    fn diagonal_continuous_split() {
        let m = RealMatrix::from_diagonal(&dvector![-1.0, 2.0]);
        let (rep, split) = eigen_split(&m, Mode::Continuous, 1e-9).unwrap();
        assert_eq!(rep.stable_count(), 1);
        assert_eq!(rep.unstable_count(), 1);
        assert!((split.stable_basis.column(0) - dvector![1.0, 0.0]).norm() < 1e-12);
        assert!((split.unstable_basis.column(0) - dvector![0.0, 1.0]).norm() < 1e-12);
        assert_eq!(rep.margin, 1.0);
    }

    #[test]
    fn rotation_is_not_hyperbolic() {
        let m = RealMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(matches!(
            eigen_split(&m, Mode::Continuous, 1e-9),
            Err(Error::NotHyperbolic { .. })
        ));
    }

    #[test]
    fn zero_matrix_is_not_hyperbolic() {
        let m = RealMatrix::zeros(2, 2);
        assert!(matches!(
            eigen_split(&m, Mode::Continuous, 1e-9),
            Err(Error::NotHyperbolic { .. })
        ));
    }

    #[test]
    fn cat_map_discrete_split() {
        let (rep, split) = eigen_split(&cat(), Mode::Discrete, 1e-9).unwrap();
        let s5 = 5f64.sqrt();
        assert_eq!(rep.stable_count(), 1);
        assert!((rep.eigenvalues[0].re - (3.0 - s5) / 2.0).abs() < 1e-12);
        assert!((rep.eigenvalues[1].re - (3.0 + s5) / 2.0).abs() < 1e-12);
        assert!((rep.margin - (1.0 - (3.0 - s5) / 2.0)).abs() < 1e-12);
        // B v = λ v on the stable line
        let v = split.stable_basis.column(0);
        let bv = cat() * v;
        assert!((bv - v * ((3.0 - s5) / 2.0)).norm() < 1e-12);
    }

    #[test]
    fn unit_circle_rejected_in_discrete_mode() {
        let m = RealMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(eigen_split(&m, Mode::Discrete, 1e-9).is_err());
        assert!(eigen_split(&RealMatrix::identity(3, 3), Mode::Discrete, 1e-9).is_err());
    }

    #[test]
    fn projections_are_complementary_and_commute() {
        let m = RealMatrix::from_row_slice(
            4,
            4,
            &[0.5, 2.0, 0.0, 1.0, -2.0, 0.5, 1.0, 0.0, 0.0, 0.3, -1.0, 0.2, 0.1, 0.0, 0.4, -2.0],
        );
        let (rep, split) = eigen_split(&m, Mode::Continuous, 1e-9).unwrap();
        assert_eq!(rep.stable_count() + rep.unstable_count(), 4);
        let ident = RealMatrix::identity(4, 4);
        assert!((&split.proj_stable + &split.proj_unstable - &ident).norm() < 1e-12);
        assert!((&split.proj_stable * &split.proj_stable - &split.proj_stable).norm() < 1e-10);
        assert!((&split.proj_stable * &split.proj_unstable).norm() < 1e-10);
        assert!((&split.proj_stable * &m - &m * &split.proj_stable).norm() < 1e-9);
    }

    #[test]
    fn degenerate_all_stable() {
        let m = -RealMatrix::identity(2, 2);
        let (rep, split) = eigen_split(&m, Mode::Continuous, 1e-9).unwrap();
        assert_eq!(rep.stable_count(), 2);
        assert_eq!(split.unstable_dim(), 0);
        assert!((&split.proj_stable - RealMatrix::identity(2, 2)).norm() < 1e-14);
        assert_eq!(rep.multiplicities(1e-9), vec![(Complex::new(-1.0, 0.0), 2)]);
    }

    #[test]
    fn defective_block_is_split() {
        // Jordan block at -1 coupled to an unstable direction
        let m = RealMatrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.5, 0.0, -1.0, 0.2, 0.0, 0.0, 3.0]);
        let (rep, split) = eigen_split(&m, Mode::Continuous, 1e-9).unwrap();
        assert_eq!(rep.stable_count(), 2);
        assert!((&split.proj_stable * &m - &m * &split.proj_stable).norm() < 1e-9);
    }
}

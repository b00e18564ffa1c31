//! Exact integer matrices over `BigInt`.

use std::fmt;
use std::ops::Mul;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::{Error, RealMatrix, Result};

/// Square matrix of arbitrary-precision integers, stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    dim: usize,
    entries: Vec<BigInt>,
}

impl IntMatrix {
    pub fn from_rows<T: Into<BigInt> + Clone>(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            entries.extend(row.iter().cloned().map(Into::into));
        }
        Ok(Self { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = BigInt::one();
        }
        m
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![BigInt::zero(); dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> &BigInt {
        &self.entries[row * self.dim + col]
    }

    fn set(&mut self, row: usize, col: usize, v: BigInt) {
        self.entries[row * self.dim + col] = v;
    }

    pub fn rows(&self) -> Vec<Vec<BigInt>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn to_real(&self) -> RealMatrix {
        RealMatrix::from_fn(self.dim, self.dim, |i, j| {
            self.get(i, j).to_f64().unwrap_or(f64::NAN)
        })
    }

    /// Rounds every entry of `a` to the nearest integer, also returning the
    /// largest distance of an entry to its rounding.
    pub fn round_from(a: &RealMatrix) -> Result<(Self, f64)> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let dim = a.nrows();
        let mut m = Self::zeros(dim);
        let mut deviation = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let r = a[(i, j)].round();
                deviation = deviation.max((a[(i, j)] - r).abs());
                let v = BigRational::from_float(r)
                    .ok_or(Error::NonFinite)?
                    .to_integer();
                m.set(i, j, v);
            }
        }
        Ok((m, deviation))
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> BigInt {
        bareiss_det(self.dim, self.entries.clone())
    }

    pub fn trace(&self) -> BigInt {
        (0..self.dim).map(|i| self.get(i, i).clone()).sum()
    }

    pub fn adjugate(&self) -> Self {
        let n = self.dim;
        if n == 1 {
            return Self::identity(1);
        }
        let mut adj = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut minor = Vec::with_capacity((n - 1) * (n - 1));
                for r in (0..n).filter(|&r| r != i) {
                    for c in (0..n).filter(|&c| c != j) {
                        minor.push(self.get(r, c).clone());
                    }
                }
                let cofactor = bareiss_det(n - 1, minor);
                let signed = if (i + j) % 2 == 0 { cofactor } else { -cofactor };
                // adj = transpose of the cofactor matrix
                adj.set(j, i, signed);
            }
        }
        adj
    }

    /// Exact inverse; requires `det = ±1`.
    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if det.abs() != BigInt::one() {
            return Err(Error::NotUnimodular { det });
        }
        let adj = self.adjugate();
        Ok(if det.is_negative() { -adj } else { adj })
    }

    /// Exact power by binary exponentiation; negative exponents require a
    /// unimodular matrix.
    pub fn pow(&self, n: i64) -> Result<Self> {
        let base = if n < 0 { self.inverse()? } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = Self::identity(self.dim);
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &sq;
            }
            e >>= 1;
            if e > 0 {
                sq = &sq * &sq;
            }
        }
        Ok(acc)
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(v.len(), self.dim, "vector length must match matrix dimension");
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| self.get(i, j) * &v[j])
                    .sum::<BigInt>()
            })
            .collect()
    }

    pub fn mul_rational_vec(&self, v: &[BigRational]) -> Vec<BigRational> {
        assert_eq!(v.len(), self.dim, "vector length must match matrix dimension");
        (0..self.dim)
            .map(|i| {
                (0..self.dim).fold(BigRational::zero(), |acc, j| {
                    acc + &v[j] * BigRational::from_integer(self.get(i, j).clone())
                })
            })
            .collect()
    }

    /// `I - self`.
    pub fn identity_minus(&self) -> Self {
        let mut m = -self.clone();
        for i in 0..self.dim {
            let v = self.get(i, i);
            m.set(i, i, BigInt::one() - v);
        }
        m
    }

    /// Exact solution of `self · x = b` over the rationals (Cramer via the
    /// adjugate).
    pub fn solve_rational(&self, b: &[BigRational]) -> Result<Vec<BigRational>> {
        let det = self.det();
        if det.is_zero() {
            return Err(Error::NotInvertible);
        }
        let adj = self.adjugate();
        let det = BigRational::from_integer(det);
        Ok(adj.mul_rational_vec(b).into_iter().map(|x| x / &det).collect())
    }

    /// Exact inverse over the rationals, rendered to `f64` entrywise.
    pub fn inverse_to_real(&self) -> Result<RealMatrix> {
        let det = self.det();
        if det.is_zero() {
            return Err(Error::NotInvertible);
        }
        let adj = self.adjugate();
        Ok(RealMatrix::from_fn(self.dim, self.dim, |i, j| {
            ratio_to_f64(adj.get(i, j), &det)
        }))
    }
}

impl Mul for &IntMatrix {
    type Output = IntMatrix;

    fn mul(self, rhs: &IntMatrix) -> IntMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimensions must agree");
        let n = self.dim;
        let mut out = IntMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    out.entries[i * n + j] += a * rhs.get(k, j);
                }
            }
        }
        out
    }
}

impl std::ops::Neg for IntMatrix {
    type Output = IntMatrix;

    fn neg(mut self) -> IntMatrix {
        for e in &mut self.entries {
            *e = -std::mem::take(e);
        }
        self
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows().iter()).finish()
    }
}

/// Determinant and `Bⁿ` together; negative `n` requires `|det| = 1`.
pub fn int_det_and_power(b: &IntMatrix, n: i64) -> Result<(BigInt, IntMatrix)> {
    let det = b.det();
    if n < 0 && det.abs() != BigInt::one() {
        return Err(Error::NotUnimodular { det });
    }
    Ok((det, b.pow(n)?))
}

fn bareiss_det(n: usize, mut a: Vec<BigInt>) -> BigInt {
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k * n + k].is_zero() {
            match (k + 1..n).find(|&r| !a[r * n + k].is_zero()) {
                Some(r) => {
                    for c in 0..n {
                        a.swap(k * n + c, r * n + c);
                    }
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[i * n + j] * &a[k * n + k] - &a[i * n + k] * &a[k * n + j];
                // exact by Sylvester's identity
                a[i * n + j] = v.div_floor(&prev);
            }
        }
        prev = a[k * n + k].clone();
    }
    sign * &a[n * n - 1]
}

/// `num / den` as the nearest-ish `f64`, robust to operands beyond the `f64`
/// range.
pub(crate) fn ratio_to_f64(num: &BigInt, den: &BigInt) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = num.bits().max(den.bits()).saturating_sub(900);
    let n = (num >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (den >> shift).to_f64().unwrap_or(f64::NAN);
    if d == 0.0 {
        // |den| ≪ |num|: fall back to the exact rational conversion
        return BigRational::new(num.clone(), den.clone())
            .to_f64()
            .unwrap_or(f64::INFINITY);
    }
    n / d
}

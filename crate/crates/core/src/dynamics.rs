//! Lattice dynamics of a hyperbolic toral automorphism `B`: certificates,
//! isotropy fixed points `x = (I − Bⁿ)⁻¹b`, torus orbits, density and the
//! boundedness of `‖(I − Bⁿ)⁻¹‖`.
//!
//! Inputs given as `f64` are converted to rationals exactly, so orbits and
//! fixed points are those of the represented numbers, without drift.

use std::cmp::Ordering;
use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use rayon::prelude::*;

use crate::linalg::{
    self, eigen_split, expm, operator_norm, IntMatrix, Mode, SpectrumReport, DEFAULT_HYPERBOLIC_TOL,
};
use crate::{Error, RealMatrix, RealVector, Result};

/// Consecutive small differences needed to call a norm scan stable.
pub const TAIL_WINDOW: usize = 20;
pub const TAIL_TOL: f64 = 1e-6;

/// Largest number of boxes `density_report` will allocate.
const MAX_BOXES: usize = 1 << 26;

/// Certifies `B ∈ SL(N, Z)` with no eigenvalue within `tol` of the unit circle.
pub fn check_hyperbolic_toral(b: &IntMatrix, tol: f64) -> Result<SpectrumReport> {
    let det = b.det();
    if !det.is_one() {
        return Err(Error::NotInSl { det });
    }
    Ok(eigen_split(&b.to_real(), Mode::Discrete, tol)?.0)
}

/// Certified lattice data `σ·exp(hM)·σ⁻¹ = B ∈ SL(N, Z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub b: IntMatrix,
    pub sigma: RealMatrix,
    pub h: f64,
    pub m: RealMatrix,
    /// `‖exp(hM) − σ⁻¹Bσ‖`.
    pub residual: f64,
    /// Largest distance of an entry of `σ·exp(hM)·σ⁻¹` to its rounding.
    pub max_deviation: f64,
    pub spectrum: SpectrumReport,
}

/// Largest accepted `‖exp(hM) − σ⁻¹Bσ‖`.
pub const LATTICE_RESIDUAL_TOL: f64 = 1e-8;

pub fn check_lattice_condition(m: &RealMatrix, sigma: &RealMatrix, h: f64, tol: f64) -> Result<LatticeSpec> {
    let n = linalg::ensure_square(m)?;
    if sigma.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: sigma.nrows(),
        });
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument(format!("lattice step h = {h}")));
    }
    linalg::ensure_finite(sigma)?;
    let sigma_inv = linalg::inverse(sigma)?;
    let flow = expm(m, h)?;
    let k = sigma * &flow * &sigma_inv;
    let (b, max_deviation) = IntMatrix::round_from(&k)?;
    if max_deviation > tol {
        return Err(Error::NonIntegral { max_deviation });
    }
    let det = b.det();
    if !det.is_one() {
        return Err(Error::NotUnimodular { det });
    }
    let spectrum = check_hyperbolic_toral(&b, DEFAULT_HYPERBOLIC_TOL)?;
    let residual = (&flow - &sigma_inv * b.to_real() * sigma).norm();
    if residual > LATTICE_RESIDUAL_TOL {
        return Err(Error::Inconsistent { residual });
    }
    Ok(LatticeSpec {
        b,
        sigma: sigma.clone(),
        h,
        m: m.clone(),
        residual,
        max_deviation,
        spectrum,
    })
}

/// Point `x` fixed by the lattice element `(b, n)`: `Bⁿx + b = x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointRecord {
    pub b: Vec<BigInt>,
    pub n: i64,
    pub x: RealVector,
    pub x_exact: Vec<BigRational>,
    /// `‖(I − Bⁿ)x − b‖` for the rounded `x`, evaluated exactly.
    pub residual: f64,
}

impl FixedPointRecord {
    /// `‖Bⁿx + b − x‖` in double precision.
    pub fn isotropy_defect(&self, b: &IntMatrix) -> Result<f64> {
        let power = b.pow(self.n)?.to_real();
        let shift = int_vector_to_real(&self.b);
        Ok((power * &self.x + shift - &self.x).norm())
    }
}

pub fn fixed_point(b: &IntMatrix, shift: &[BigInt], n: i64) -> Result<FixedPointRecord> {
    let system = identity_minus_power(b, n, shift.len())?;
    let rhs: Vec<BigRational> = shift.iter().cloned().map(BigRational::from_integer).collect();
    let x_exact = system.solve_rational(&rhs)?;
    Ok(record_from_exact(&system, shift.to_vec(), n, x_exact))
}

fn identity_minus_power(b: &IntMatrix, n: i64, len: usize) -> Result<IntMatrix> {
    if n == 0 {
        return Err(Error::ZeroPower);
    }
    if len != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            found: len,
        });
    }
    Ok(b.pow(n)?.identity_minus())
}

fn record_from_exact(system: &IntMatrix, shift: Vec<BigInt>, n: i64, x_exact: Vec<BigRational>) -> FixedPointRecord {
    let x = rational_vector_to_real(&x_exact);
    let rounded: Vec<BigRational> = x.iter().map(|&v| exact_rational(v)).collect();
    let lhs = system.mul_rational_vec(&rounded);
    let residual = lhs
        .iter()
        .zip(&shift)
        .map(|(l, s)| (l - BigRational::from_integer(s.clone())).to_f64().unwrap_or(f64::INFINITY))
        .map(|d| d * d)
        .sum::<f64>()
        .sqrt();
    FixedPointRecord {
        b: shift,
        n,
        x,
        x_exact,
        residual,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepStrategy {
    /// One `b` per `n`: the rounding of `x* − Bⁿx*`.
    Rounding,
    /// Every `b ∈ [−radius, radius]^N`.
    Exhaustive { radius: u32 },
}

/// Fixed point approximating a target, with both sides of
/// `‖x − x*‖ ≤ C·‖y − x*‖` where `y = Bⁿx* + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub record: FixedPointRecord,
    pub distance: f64,
    pub y_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    /// Sorted by `distance`, ties by `n`.
    pub records: Vec<SweepRecord>,
    /// `sup ‖(I − Bⁿ)⁻¹‖₂` over the swept `n`.
    pub c_sup: f64,
    /// Limit of `‖(I − Bⁿ)⁻¹‖₂` as `n → ∞`.
    pub c_limit: f64,
    /// Largest `distance / (C·y_distance)`; at most one when the bound holds.
    pub max_bound_ratio: f64,
    pub bound_holds: bool,
}

impl SweepReport {
    pub fn best(&self) -> Option<&SweepRecord> {
        self.records.first()
    }
}

/// Relative slack allowed when checking the `C·‖y − x*‖` bound.
const BOUND_SLACK: f64 = 1e-12;

/// Fixed points `x(b, n)` for `1 ≤ n ≤ n_max` approximating `target`.
pub fn fixed_point_sweep(
    b: &IntMatrix,
    target: &RealVector,
    n_max: u32,
    strategy: SweepStrategy,
) -> Result<SweepReport> {
    if n_max == 0 {
        return Err(Error::EmptySweep);
    }
    if target.len() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            found: target.len(),
        });
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    check_hyperbolic_toral(b, DEFAULT_HYPERBOLIC_TOL)?;
    let scan = norm_bound_scan(b, &(1..=n_max as i64).collect::<Vec<_>>())?;
    let c_sup = scan.sup;

    let star: Vec<BigRational> = target.iter().map(|&v| exact_rational(v)).collect();
    let per_n = (1..=n_max as i64)
        .into_par_iter()
        .map(|n| sweep_one(b, &star, n, strategy))
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<SweepRecord> = per_n.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.record.n.cmp(&b.record.n))
            .then_with(|| a.record.b.cmp(&b.record.b))
    });

    let max_bound_ratio = records
        .iter()
        .map(|r| if r.distance == 0.0 { 0.0 } else { r.distance / (c_sup * r.y_distance) })
        .fold(0.0, f64::max);
    Ok(SweepReport {
        records,
        c_sup,
        c_limit: scan.limit_forward,
        bound_holds: max_bound_ratio <= 1.0 + BOUND_SLACK,
        max_bound_ratio,
    })
}

fn sweep_one(b: &IntMatrix, star: &[BigRational], n: i64, strategy: SweepStrategy) -> Result<Vec<SweepRecord>> {
    let power = b.pow(n)?;
    let system = power.identity_minus();
    let moved = power.mul_rational_vec(star);
    let evaluate = |shift: Vec<BigInt>| -> Result<SweepRecord> {
        let rhs: Vec<BigRational> = shift.iter().cloned().map(BigRational::from_integer).collect();
        let x_exact = system.solve_rational(&rhs)?;
        let distance = rational_distance(&x_exact, star);
        let y: Vec<BigRational> = moved.iter().zip(&rhs).map(|(m, s)| m + s).collect();
        let y_distance = rational_distance(&y, star);
        Ok(SweepRecord {
            record: record_from_exact(&system, shift, n, x_exact),
            distance,
            y_distance,
        })
    };
    match strategy {
        SweepStrategy::Rounding => {
            let shift = star.iter().zip(&moved).map(|(s, m)| (s - m).round().to_integer()).collect();
            Ok(vec![evaluate(shift)?])
        }
        SweepStrategy::Exhaustive { radius } => {
            let r = radius as i64;
            box_points(star.len(), r).map(|p| evaluate(p.into_iter().map(BigInt::from).collect())).collect()
        }
    }
}

/// All integer points of `[−r, r]^dim`.
fn box_points(dim: usize, r: i64) -> impl Iterator<Item = Vec<i64>> {
    let side = (2 * r + 1) as u64;
    let total = side.checked_pow(dim as u32).unwrap_or(u64::MAX);
    (0..total).map(move |mut idx| {
        (0..dim)
            .map(|_| {
                let v = (idx % side) as i64 - r;
                idx /= side;
                v
            })
            .collect()
    })
}

/// The default generic point `(√2 − 1, √3 − 1, √5 − 2, …)`: fractional
/// parts of square roots of the first `dim` primes.
pub fn generic_point(dim: usize) -> RealVector {
    let primes = (2u64..).filter(|&p| (2..p).take_while(|d| d * d <= p).all(|d| p % d != 0));
    RealVector::from_iterator(dim, primes.take(dim).map(|p| (p as f64).sqrt().fract()))
}

/// `{Bⁿx₀ mod 1 : 0 ≤ n ≤ n_max}`, exact for the represented `x₀`.
pub fn torus_orbit(b: &IntMatrix, x0: &RealVector, n_max: usize) -> Result<Vec<RealVector>> {
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let exact: Vec<BigRational> = x0.iter().map(|&v| exact_rational(v)).collect();
    let mut walk = TorusWalk::new(b, &exact)?;
    let mut points = Vec::with_capacity(n_max + 1);
    for step in 0..=n_max {
        if step > 0 {
            walk.step(b);
        }
        points.push(walk.point_f64());
    }
    Ok(points)
}

/// Exact orbit of a rational point.
pub fn torus_orbit_rational(b: &IntMatrix, x0: &[BigRational], n_max: usize) -> Result<Vec<Vec<BigRational>>> {
    let mut walk = TorusWalk::new(b, x0)?;
    let mut points = Vec::with_capacity(n_max + 1);
    for step in 0..=n_max {
        if step > 0 {
            walk.step(b);
        }
        points.push(walk.point());
    }
    Ok(points)
}

/// `(preperiod, period)` of the orbit of a rational point, or `None` when no
/// repetition occurs within `max_steps`.
pub fn orbit_period(b: &IntMatrix, x0: &[BigRational], max_steps: usize) -> Result<Option<(usize, usize)>> {
    let mut walk = TorusWalk::new(b, x0)?;
    let mut seen: HashMap<Vec<BigInt>, usize> = HashMap::new();
    for step in 0..=max_steps {
        if let Some(first) = seen.insert(walk.numerators(), step) {
            return Ok(Some((first, step - first)));
        }
        walk.step(b);
    }
    Ok(None)
}

/// Point `numer / denom` of the torus, numerators kept in `[0, denom)`.
/// Uses `i128` arithmetic when no intermediate can overflow it.
struct TorusWalk {
    numer: Vec<BigInt>,
    denom: BigInt,
    fast: Option<FastWalk>,
}

struct FastWalk {
    matrix: Vec<i128>,
    numer: Vec<i128>,
    denom: i128,
}

impl FastWalk {
    fn new(b: &IntMatrix, numer: &[BigInt], denom: &BigInt) -> Option<Self> {
        let n = b.dim();
        let matrix: Vec<i128> = (0..n * n)
            .map(|k| b.get(k / n, k % n).to_i64().map(i128::from))
            .collect::<Option<_>>()?;
        let row_sum = (0..n)
            .map(|i| matrix[i * n..(i + 1) * n].iter().map(|v| v.unsigned_abs()).sum::<u128>())
            .max()
            .unwrap_or(0);
        if denom.bits() > 62 || row_sum >= 1 << 60 {
            return None;
        }
        Some(Self {
            matrix,
            numer: numer.iter().map(|v| v.to_i128().expect("below denom")).collect(),
            denom: denom.to_i128().expect("checked size"),
        })
    }

    fn step(&mut self) {
        let n = self.numer.len();
        self.numer = (0..n)
            .map(|i| {
                let row = &self.matrix[i * n..(i + 1) * n];
                row.iter().zip(&self.numer).map(|(a, x)| a * x).sum::<i128>().rem_euclid(self.denom)
            })
            .collect();
    }
}

impl TorusWalk {
    fn new(b: &IntMatrix, x0: &[BigRational]) -> Result<Self> {
        if x0.len() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: b.dim(),
                found: x0.len(),
            });
        }
        let denom = x0.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
        let numer: Vec<BigInt> = x0
            .iter()
            .map(|v| (v.numer() * (&denom / v.denom())).mod_floor(&denom))
            .collect();
        let fast = FastWalk::new(b, &numer, &denom);
        Ok(Self { numer, denom, fast })
    }

    fn step(&mut self, b: &IntMatrix) {
        match &mut self.fast {
            Some(fast) => fast.step(),
            None => {
                self.numer = b
                    .mul_vec(&self.numer)
                    .into_iter()
                    .map(|v| v.mod_floor(&self.denom))
                    .collect();
            }
        }
    }

    fn numerators(&self) -> Vec<BigInt> {
        match &self.fast {
            Some(fast) => fast.numer.iter().map(|&v| BigInt::from(v)).collect(),
            None => self.numer.clone(),
        }
    }

    fn point(&self) -> Vec<BigRational> {
        self.numerators()
            .into_iter()
            .map(|p| BigRational::new(p, self.denom.clone()))
            .collect()
    }

    fn point_f64(&self) -> RealVector {
        let coords: Vec<f64> = match &self.fast {
            // exact: numerator and denominator are below 2^62, the quotient
            // is correctly rounded once
            Some(fast) if fast.denom.unsigned_abs() <= 1 << 53 => {
                fast.numer.iter().map(|&p| p as f64 / fast.denom as f64).collect()
            }
            _ => self
                .point()
                .iter()
                .map(|v| v.to_f64().unwrap_or(0.0))
                .collect(),
        };
        // rounding can land on 1.0 for numerators just below the denominator
        RealVector::from_iterator(coords.len(), coords.into_iter().map(|v| if v >= 1.0 { 0.0 } else { v }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub epsilon: f64,
    pub boxes_total: usize,
    pub boxes_hit: usize,
    pub coverage: f64,
    /// Largest torus distance from a box centre to the nearest point.
    pub max_gap: f64,
}

/// Coverage of the `⌈1/ε⌉^N` boxes of `[0, 1)^N` by `points`.
pub fn density_report(points: &[RealVector], epsilon: f64) -> Result<DensityReport> {
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    let Some(first) = points.first() else {
        return Err(Error::InvalidArgument("no points".into()));
    };
    let dim = first.len();
    let per_axis = (1.0 / epsilon).ceil() as usize;
    let boxes_total = per_axis
        .checked_pow(dim as u32)
        .filter(|&t| t <= MAX_BOXES)
        .ok_or_else(|| Error::InvalidArgument(format!("too many boxes for epsilon {epsilon} in dimension {dim}")))?;

    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); boxes_total];
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.len(),
            });
        }
        if p.iter().any(|&v| !(0.0..1.0).contains(&v)) {
            return Err(Error::InvalidArgument("points must lie in [0, 1)".into()));
        }
        let cell: Vec<usize> = p.iter().map(|&v| ((v * per_axis as f64) as usize).min(per_axis - 1)).collect();
        buckets[flat_index(&cell, per_axis)].push(i as u32);
    }
    let boxes_hit = buckets.iter().filter(|b| !b.is_empty()).count();

    let width = 1.0 / per_axis as f64;
    let max_gap = (0..boxes_total)
        .into_par_iter()
        .map(|idx| {
            let cell = unflatten(idx, per_axis, dim);
            let centre: Vec<f64> = cell.iter().map(|&c| (c as f64 + 0.5) * width).collect();
            nearest_distance(&centre, &cell, per_axis, &buckets, points)
        })
        .reduce(|| 0.0, f64::max);

    Ok(DensityReport {
        epsilon,
        boxes_total,
        boxes_hit,
        coverage: boxes_hit as f64 / boxes_total as f64,
        max_gap,
    })
}

fn flat_index(cell: &[usize], per_axis: usize) -> usize {
    cell.iter().rev().fold(0, |acc, &c| acc * per_axis + c)
}

fn unflatten(mut idx: usize, per_axis: usize, dim: usize) -> Vec<usize> {
    (0..dim)
        .map(|_| {
            let c = idx % per_axis;
            idx /= per_axis;
            c
        })
        .collect()
}

fn torus_distance(a: &[f64], b: &RealVector) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = (x - y).abs().fract();
            let d = d.min(1.0 - d);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Searches Chebyshev rings of boxes around `cell`; points outside ring `r`
/// are at least `(r + 0.5)` box widths from the centre.
fn nearest_distance(centre: &[f64], cell: &[usize], per_axis: usize, buckets: &[Vec<u32>], points: &[RealVector]) -> f64 {
    let dim = cell.len();
    let width = 1.0 / per_axis as f64;
    let mut best = f64::INFINITY;
    let mut r = 0i64;
    loop {
        for offset in box_points(dim, r).filter(|o| o.iter().any(|v| v.abs() == r)) {
            let target: Vec<usize> = cell
                .iter()
                .zip(&offset)
                .map(|(&c, &o)| (c as i64 + o).rem_euclid(per_axis as i64) as usize)
                .collect();
            for &i in &buckets[flat_index(&target, per_axis)] {
                best = best.min(torus_distance(centre, &points[i as usize]));
            }
        }
        if best <= (r as f64 + 0.5) * width || (2 * r + 1) as usize >= per_axis {
            return best;
        }
        r += 1;
    }
}

/// `‖(I − Bⁿ)⁻¹‖₂` over a range of `n`, with the limits as `n → ±∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormScan {
    /// `(n, ‖(I − Bⁿ)⁻¹‖₂)` in increasing `n`.
    pub values: Vec<(i64, f64)>,
    pub sup: f64,
    pub sup_at: i64,
    /// `‖π_s‖₂`, the limit as `n → +∞`.
    pub limit_forward: f64,
    /// `‖π_u‖₂`, the limit as `n → −∞`.
    pub limit_backward: f64,
    /// First `n > 0` from which [`TAIL_WINDOW`] successive differences stay
    /// below [`TAIL_TOL`].
    pub tail_start: Option<i64>,
}

impl NormScan {
    pub fn tail_stable(&self) -> bool {
        self.tail_start.is_some()
    }

    pub fn value_at(&self, n: i64) -> Option<f64> {
        self.values
            .binary_search_by_key(&n, |(k, _)| *k)
            .ok()
            .map(|i| self.values[i].1)
    }
}

/// Scan for an integer `B`; powers and inverses are exact.
pub fn norm_bound_scan(b: &IntMatrix, ns: &[i64]) -> Result<NormScan> {
    check_hyperbolic_toral(b, DEFAULT_HYPERBOLIC_TOL)?;
    let (limit_forward, limit_backward) = projection_limits(&b.to_real())?;
    let ns = sorted_range(ns)?;
    let values = ns
        .par_iter()
        .map(|&n| {
            let inv = b.pow(n)?.identity_minus().inverse_to_real()?;
            Ok((n, operator_norm(&inv)?))
        })
        .collect::<Result<Vec<_>>>()?;
    finish_scan(values, limit_forward, limit_backward)
}

/// Scan for a real `B` with no eigenvalue on the unit circle.
pub fn norm_bound_scan_real(b: &RealMatrix, ns: &[i64]) -> Result<NormScan> {
    linalg::ensure_square(b)?;
    linalg::ensure_finite(b)?;
    let (limit_forward, limit_backward) = projection_limits(b)?;
    let ns = sorted_range(ns)?;
    let b_inv = if ns.iter().any(|&n| n < 0) {
        Some(linalg::inverse(b)?)
    } else {
        None
    };
    let values = ns
        .par_iter()
        .map(|&n| {
            let base = if n < 0 { b_inv.as_ref().expect("computed above") } else { b };
            let power = real_power(base, n.unsigned_abs());
            let ident = RealMatrix::identity(b.nrows(), b.nrows());
            let inv = linalg::inverse(&(ident - power))?;
            Ok((n, operator_norm(&inv)?))
        })
        .collect::<Result<Vec<_>>>()?;
    finish_scan(values, limit_forward, limit_backward)
}

fn projection_limits(b: &RealMatrix) -> Result<(f64, f64)> {
    let (_, split) = eigen_split(b, Mode::Discrete, DEFAULT_HYPERBOLIC_TOL)?;
    Ok((operator_norm(&split.proj_stable)?, operator_norm(&split.proj_unstable)?))
}

fn sorted_range(ns: &[i64]) -> Result<Vec<i64>> {
    if ns.is_empty() {
        return Err(Error::EmptySweep);
    }
    if ns.contains(&0) {
        return Err(Error::ZeroPower);
    }
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    Ok(ns)
}

fn real_power(b: &RealMatrix, mut e: u64) -> RealMatrix {
    let mut acc = RealMatrix::identity(b.nrows(), b.nrows());
    let mut sq = b.clone();
    while e > 0 {
        if e & 1 == 1 {
            acc = &acc * &sq;
        }
        e >>= 1;
        if e > 0 {
            sq = &sq * &sq;
        }
    }
    acc
}

fn finish_scan(values: Vec<(i64, f64)>, limit_forward: f64, limit_backward: f64) -> Result<NormScan> {
    if values.iter().any(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (sup_at, sup) = values
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .expect("range is nonempty");
    let positive: Vec<(i64, f64)> = values.iter().copied().filter(|(n, _)| *n > 0).collect();
    let mut run = 0usize;
    let mut tail_start = None;
    for (i, pair) in positive.windows(2).enumerate() {
        let consecutive = pair[1].0 == pair[0].0 + 1;
        if consecutive && (pair[1].1 - pair[0].1).abs() < TAIL_TOL {
            run += 1;
            if run == TAIL_WINDOW {
                tail_start = Some(positive[i + 1 - TAIL_WINDOW].0);
                break;
            }
        } else {
            run = 0;
        }
    }
    Ok(NormScan {
        values,
        sup,
        sup_at,
        limit_forward,
        limit_backward,
        tail_start,
    })
}

/// Best approximation of `target` by `Bⁿx* + b` over `0 ≤ n ≤ n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineApprox {
    pub b: Vec<BigInt>,
    pub n: u64,
    pub distance: f64,
}

/// For each `n` takes `b = round(target − Bⁿx*)`; the first minimiser wins.
pub fn affine_orbit_approx(b: &IntMatrix, x_star: &RealVector, target: &RealVector, n_max: u64) -> Result<AffineApprox> {
    for v in [x_star, target] {
        if v.len() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: b.dim(),
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    let target: Vec<BigRational> = target.iter().map(|&v| exact_rational(v)).collect();
    let start: Vec<BigRational> = x_star.iter().map(|&v| exact_rational(v)).collect();
    // the distance only depends on Bⁿx* mod 1, so walk on the torus and
    // form the (huge) integer shift once, for the winner
    let mut walk = TorusWalk::new(b, &start)?;
    let mut best: Option<(u64, f64)> = None;
    for n in 0..=n_max {
        if n > 0 {
            walk.step(b);
        }
        let landed: Vec<BigRational> = walk
            .point()
            .into_iter()
            .zip(&target)
            .map(|(m, t)| {
                let shift = (t - &m).round();
                m + shift
            })
            .collect();
        let distance = rational_distance(&landed, &target);
        if best.is_none_or(|(_, d)| distance.partial_cmp(&d) == Some(Ordering::Less)) {
            best = Some((n, distance));
        }
    }
    let (n, distance) = best.expect("n = 0 is always evaluated");
    let power = b.pow(i64::try_from(n).map_err(|_| Error::MagnitudeOverflow)?)?;
    let shift = power
        .mul_rational_vec(&start)
        .iter()
        .zip(&target)
        .map(|(m, t)| (t - m).round().to_integer())
        .collect();
    Ok(AffineApprox { b: shift, n, distance })
}

/// Exact value of a finite `f64`.
pub fn exact_rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite input")
}

fn rational_vector_to_real(v: &[BigRational]) -> RealVector {
    RealVector::from_iterator(v.len(), v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)))
}

fn int_vector_to_real(v: &[BigInt]) -> RealVector {
    RealVector::from_iterator(v.len(), v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)))
}

/// Euclidean distance, each coordinate difference formed exactly.
fn rational_distance(a: &[BigRational], b: &[BigRational]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).abs().to_f64().unwrap_or(f64::INFINITY);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn cat() -> IntMatrix {
        IntMatrix::from_rows(&[vec![2, 1], vec![1, 1]]).unwrap()
    }

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    fn ratio(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn hyperbolic_toral_examples() {
        let report = check_hyperbolic_toral(&cat(), 1e-9).unwrap();
        let mut margins = report.margins();
        margins.sort_by(f64::total_cmp);
        assert!((margins[0] - (1.0 - 0.381966011250105)).abs() < 1e-12);
        assert!((margins[1] - (2.618033988749895 - 1.0)).abs() < 1e-12);
        assert!(matches!(
            check_hyperbolic_toral(&IntMatrix::identity(2), 1e-9),
            Err(Error::NotHyperbolic { .. })
        ));
        let rot = IntMatrix::from_rows(&[vec![0, -1], vec![1, 0]]).unwrap();
        assert!(matches!(check_hyperbolic_toral(&rot, 1e-9), Err(Error::NotHyperbolic { .. })));
        let det2 = IntMatrix::from_rows(&[vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]]).unwrap();
        assert_eq!(check_hyperbolic_toral(&det2, 1e-9), Err(Error::NotInSl { det: 2.into() }));
    }

    #[test]
    fn lattice_condition_examples() {
        let m = linalg::logm(&cat().to_real()).unwrap().log;
        let ident = RealMatrix::identity(2, 2);
        let spec = check_lattice_condition(&m, &ident, 1.0, 1e-6).unwrap();
        assert_eq!(spec.b, cat());
        assert!(spec.residual < 1e-9);
        match check_lattice_condition(&m, &ident, 0.5, 1e-6) {
            Err(Error::NonIntegral { max_deviation }) => assert!(max_deviation > 0.1),
            other => panic!("unexpected {other:?}"),
        }
        let diag = RealMatrix::from_diagonal(&dvector![-1.0, 1.0]);
        assert!(matches!(
            check_lattice_condition(&diag, &ident, 1.0, 1e-6),
            Err(Error::NonIntegral { .. })
        ));
    }

    #[test]
    fn lattice_condition_with_conjugation() {
        // σ⁻¹·cat·σ as the flow at h = 1
        let sigma = RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let conj = linalg::inverse(&sigma).unwrap() * cat().to_real() * &sigma;
        let m = linalg::logm(&conj).unwrap().log;
        let spec = check_lattice_condition(&m, &sigma, 1.0, 1e-6).unwrap();
        assert_eq!(spec.b, cat());
    }

    #[test]
    fn fixed_point_examples() {
        let r = fixed_point(&cat(), &ints(&[1, 0]), 1).unwrap();
        assert_eq!(r.x, dvector![0.0, -1.0]);
        assert_eq!(r.residual, 0.0);
        let r = fixed_point(&cat(), &ints(&[0, 1]), 1).unwrap();
        assert_eq!(r.x, dvector![-1.0, 1.0]);
        for n in [-3, 1, 7] {
            assert_eq!(fixed_point(&cat(), &ints(&[0, 0]), n).unwrap().x, dvector![0.0, 0.0]);
        }
        assert_eq!(fixed_point(&cat(), &ints(&[1, 0]), 0), Err(Error::ZeroPower));
    }

    #[test]
    fn fixed_point_is_isotropic() {
        let r = fixed_point(&cat(), &ints(&[3, -2]), 5).unwrap();
        assert!(r.isotropy_defect(&cat()).unwrap() < 1e-10);
        assert!(r.residual <= 1e-8 * (1.0 + 13f64.sqrt()));
    }

    #[test]
    fn sweep_hits_existing_fixed_point() {
        let report = fixed_point_sweep(&cat(), &dvector![0.0, -1.0], 3, SweepStrategy::Rounding).unwrap();
        let best = report.best().unwrap();
        assert_eq!(best.distance, 0.0);
        assert_eq!((best.record.b.clone(), best.record.n), (ints(&[1, 0]), 1));
        assert!(report.bound_holds);
    }

    #[test]
    fn sweep_reaches_generic_point() {
        let target = generic_point(2);
        let report = fixed_point_sweep(&cat(), &target, 25, SweepStrategy::Rounding).unwrap();
        assert_eq!(report.records.len(), 25);
        assert!(report.best().unwrap().distance < 0.01);
        assert!(report.bound_holds, "ratio {}", report.max_bound_ratio);
        assert!((report.c_sup - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_sweep_agrees_at_small_n() {
        let target = generic_point(2);
        let rounding = fixed_point_sweep(&cat(), &target, 4, SweepStrategy::Rounding).unwrap();
        let full = fixed_point_sweep(&cat(), &target, 4, SweepStrategy::Exhaustive { radius: 8 }).unwrap();
        assert_eq!(full.records.len(), 4 * 17 * 17);
        assert!(full.best().unwrap().distance <= rounding.best().unwrap().distance);
        assert!(full.bound_holds);
        assert_eq!(fixed_point_sweep(&cat(), &target, 0, SweepStrategy::Rounding), Err(Error::EmptySweep));
    }

    #[test]
    fn generic_point_values() {
        let p = generic_point(4);
        let expected = [2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0, 5f64.sqrt() - 2.0, 7f64.sqrt() - 2.0];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn orbit_of_zero_is_constant() {
        let orbit = torus_orbit(&cat(), &dvector![0.0, 0.0], 10).unwrap();
        assert_eq!(orbit.len(), 11);
        assert!(orbit.iter().all(|p| p == &dvector![0.0, 0.0]));
    }

    #[test]
    fn orbit_of_half_point() {
        let orbit = torus_orbit_rational(&cat(), &[ratio(1, 2), ratio(1, 2)], 9).unwrap();
        let allowed = [
            vec![ratio(1, 2), ratio(1, 2)],
            vec![ratio(1, 2), ratio(0, 1)],
            vec![ratio(0, 1), ratio(1, 2)],
        ];
        assert!(orbit.iter().all(|p| allowed.contains(p)));
        assert_eq!(orbit[1], allowed[1]);
        assert_eq!(orbit[2], allowed[2]);
        assert_eq!(orbit[3], allowed[0]);
        assert_eq!(orbit_period(&cat(), &[ratio(1, 2), ratio(1, 2)], 100).unwrap(), Some((0, 3)));
    }

    #[test]
    fn float_orbit_matches_exact_orbit() {
        let x0 = dvector![0.375, 0.8125];
        let orbit = torus_orbit(&cat(), &x0, 40).unwrap();
        let exact = torus_orbit_rational(&cat(), &[ratio(3, 8), ratio(13, 16)], 40).unwrap();
        for (a, b) in orbit.iter().zip(&exact) {
            assert_eq!(a, &rational_vector_to_real(b));
        }
    }

    #[test]
    fn density_examples() {
        let report = density_report(&[dvector![0.1, 0.2]], 0.5).unwrap();
        assert_eq!((report.boxes_total, report.boxes_hit), (4, 1));
        assert_eq!(report.coverage, 0.25);

        let centres: Vec<RealVector> = (0..4)
            .flat_map(|i| (0..4).map(move |j| dvector![(i as f64 + 0.5) / 4.0, (j as f64 + 0.5) / 4.0]))
            .collect();
        let report = density_report(&centres, 0.25).unwrap();
        assert_eq!(report.coverage, 1.0);
        assert_eq!(report.max_gap, 0.0);

        assert_eq!(density_report(&centres, 0.0), Err(Error::EpsilonOutOfRange(0.0)));
        assert_eq!(density_report(&centres, 0.75), Err(Error::EpsilonOutOfRange(0.75)));
    }

    #[test]
    fn max_gap_uses_torus_distance() {
        // a single point at the origin: the farthest centre is (0.5 ± 1/8, …)
        let report = density_report(&[dvector![0.0, 0.0]], 0.25).unwrap();
        let far = (2.0 * 0.375f64.powi(2)).sqrt();
        assert!((report.max_gap - far).abs() < 1e-15);
    }

    #[test]
    fn norm_scan_cat() {
        let ns: Vec<i64> = (1..=200).collect();
        let scan = norm_bound_scan(&cat(), &ns).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((scan.value_at(1).unwrap() - phi).abs() < 1e-12);
        assert_eq!(scan.sup_at, 1);
        assert!((scan.limit_forward - 1.0).abs() < 1e-12);
        assert!(scan.tail_stable());
        let last = scan.values.last().unwrap().1;
        assert!((last - scan.limit_forward).abs() < 1e-12);
    }

    #[test]
    fn norm_scan_negative_powers() {
        let scan = norm_bound_scan(&cat(), &[-3, -2, -1, 1, 2, 3]).unwrap();
        for n in 1..=3i64 {
            let inv = cat().pow(n).unwrap().identity_minus().inverse_to_real().unwrap();
            let via = operator_norm(&(inv * cat().pow(n).unwrap().to_real())).unwrap();
            assert!((scan.value_at(-n).unwrap() - via).abs() < 1e-8);
        }
        assert_eq!(norm_bound_scan(&cat(), &[0, 1]), Err(Error::ZeroPower));
    }

    #[test]
    fn norm_scan_contracting_real() {
        let s = RealMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let b = &s * RealMatrix::from_diagonal(&dvector![0.5, 0.5]) * linalg::inverse(&s).unwrap();
        let ns: Vec<i64> = (1..=80).collect();
        let scan = norm_bound_scan_real(&b, &ns).unwrap();
        assert!((scan.value_at(1).unwrap() - 2.0).abs() < 1e-12);
        assert!((scan.values.last().unwrap().1 - 1.0).abs() < 1e-12);
        assert!((scan.limit_forward - 1.0).abs() < 1e-12);
        assert!(scan.tail_stable());
    }

    #[test]
    fn affine_approx_examples() {
        let x = generic_point(2);
        let best = affine_orbit_approx(&cat(), &x, &x, 5).unwrap();
        assert_eq!((best.n, best.distance), (0, 0.0));
        assert_eq!(best.b, ints(&[0, 0]));
        let target = dvector![0.5, 0.5];
        let mut prev = f64::INFINITY;
        for n_max in [0, 5, 20, 100] {
            let d = affine_orbit_approx(&cat(), &x, &target, n_max).unwrap().distance;
            assert!(d <= prev);
            prev = d;
        }
    }
}

//! Hyperbolic splitting of `C^N = R^N ⊕ iE^s ⊕ iE^u`, the stable sphere, the
//! maps `ψ±` onto `U±`, and classification of projective points into the
//! discontinuity regions and the limit set.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::group::{GroupContext, GroupElement, ProjectivePoint};
use crate::linalg::{eigen_split, expm, solve_lyapunov, Mode, SpectrumReport, Stability};
use crate::{Complex, ComplexVector, Error, RealMatrix, RealVector, Result};

pub const DEFAULT_REGION_TOL: f64 = 1e-9;

/// Largest `|V(x) − 1|` accepted for a point of a sphere.
pub const SPHERE_TOL: f64 = 1e-9;

/// `P` solving `P·G + Gᵀ·P = −I` for a Hurwitz `G`, with the decay constants
/// `‖exp(tG)x‖ ≤ C·e^{−λt}·‖x‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovMetric {
    pub p: RealMatrix,
    pub c: f64,
    pub lambda: f64,
}

impl LyapunovMetric {
    pub fn new(generator: &RealMatrix) -> Result<Self> {
        let p = solve_lyapunov(generator)?;
        let ev = p.clone().symmetric_eigenvalues();
        let (lo, hi) = (ev.min(), ev.max());
        Ok(Self {
            c: (hi / lo).sqrt(),
            lambda: 1.0 / (2.0 * hi),
            p,
        })
    }

    /// `V(x) = xᵀPx`.
    pub fn value(&self, x: &RealVector) -> f64 {
        x.dot(&(&self.p * x))
    }

    /// `‖exp(tG)x‖ / (C·e^{−λt}·‖x‖)`; at most one when the bound holds.
    pub fn decay_ratio(&self, generator: &RealMatrix, x: &RealVector, t: f64) -> Result<f64> {
        let moved = expm(generator, t)? * x;
        Ok(moved.norm() / (self.c * (-self.lambda * t).exp() * x.norm()))
    }
}

/// One side of the splitting. `basis` is orthonormal, `generator` is `M`
/// restricted to the subspace in `basis` coordinates. On the unstable side
/// the metric belongs to the reversed flow `−generator`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    pub basis: RealMatrix,
    pub projection: RealMatrix,
    pub generator: RealMatrix,
    pub metric: Option<LyapunovMetric>,
}

impl Subspace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicSplitting {
    generator: RealMatrix,
    pub stable: Subspace,
    pub unstable: Subspace,
    pub spectrum: SpectrumReport,
}

/// `z = b + i(y_s + y_u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartDecomposition {
    pub b: RealVector,
    pub y_s: RealVector,
    pub y_u: RealVector,
}

impl ChartDecomposition {
    pub fn reconstruct(&self) -> ComplexVector {
        let im = &self.y_s + &self.y_u;
        self.b.zip_map(&im, Complex::new)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionLabel {
    OmegaMinusOnly,
    OmegaPlusOnly,
    Both,
    LimitSetChart,
    LimitSetInfinity,
}

impl RegionLabel {
    pub const ALL: [RegionLabel; 5] = [
        RegionLabel::OmegaMinusOnly,
        RegionLabel::OmegaPlusOnly,
        RegionLabel::Both,
        RegionLabel::LimitSetChart,
        RegionLabel::LimitSetInfinity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::OmegaMinusOnly => "OmegaMinusOnly",
            RegionLabel::OmegaPlusOnly => "OmegaPlusOnly",
            RegionLabel::Both => "Both",
            RegionLabel::LimitSetChart => "LimitSetChart",
            RegionLabel::LimitSetInfinity => "LimitSetInfinity",
        }
    }

    pub fn in_limit_set(self) -> bool {
        matches!(self, RegionLabel::LimitSetChart | RegionLabel::LimitSetInfinity)
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RegionLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown region label {s:?}")))
    }
}

/// Label plus the relative sizes it was decided on. `near_boundary` is set
/// when `s` or `u` lies in `(tol/2, 2·tol]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub label: RegionLabel,
    pub s: f64,
    pub u: f64,
    pub near_boundary: bool,
}

/// Preimage `(g, x, y)` under `ψ±`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiPreimage {
    pub g: GroupElement,
    pub x: RealVector,
    pub y: RealVector,
}

pub fn build_splitting(m: &RealMatrix, tol: f64) -> Result<HyperbolicSplitting> {
    let (spectrum, split) = eigen_split(m, Mode::Continuous, tol)?;
    let side = |basis: RealMatrix, projection: RealMatrix, reversed: bool| -> Result<Subspace> {
        let generator = basis.transpose() * m * &basis;
        let metric = if basis.ncols() == 0 {
            None
        } else if reversed {
            Some(LyapunovMetric::new(&-&generator)?)
        } else {
            Some(LyapunovMetric::new(&generator)?)
        };
        Ok(Subspace {
            basis,
            projection,
            generator,
            metric,
        })
    };
    Ok(HyperbolicSplitting {
        generator: m.clone(),
        stable: side(split.stable_basis, split.proj_stable, false)?,
        unstable: side(split.unstable_basis, split.proj_unstable, true)?,
        spectrum,
    })
}

impl HyperbolicSplitting {
    pub fn dim(&self) -> usize {
        self.generator.nrows()
    }

    pub fn generator(&self) -> &RealMatrix {
        &self.generator
    }

    pub fn stable_dim(&self) -> usize {
        self.stable.dim()
    }

    pub fn unstable_dim(&self) -> usize {
        self.unstable.dim()
    }

    /// One of the sides is trivial, so the matching region is absent.
    pub fn is_degenerate(&self) -> bool {
        self.stable.is_empty() || self.unstable.is_empty()
    }

    pub fn side(&self, side: Stability) -> &Subspace {
        match side {
            Stability::Stable => &self.stable,
            Stability::Unstable => &self.unstable,
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: len,
            })
        }
    }

    fn check_context(&self, ctx: &GroupContext) -> Result<()> {
        self.check_dim(ctx.dim())?;
        let residual = (ctx.generator() - &self.generator).norm();
        if residual > 1e-12 * self.generator.norm().max(1.0) {
            return Err(Error::SplitMismatch { residual });
        }
        Ok(())
    }

    pub fn decompose(&self, z: &ComplexVector) -> Result<ChartDecomposition> {
        self.check_dim(z.len())?;
        let im = z.map(|c| c.im);
        let y_s = &self.stable.projection * &im;
        let y_u = im - &y_s;
        Ok(ChartDecomposition {
            b: z.map(|c| c.re),
            y_s,
            y_u,
        })
    }

    /// Coordinates of `π x` in the orthonormal basis of `side`.
    pub fn coords(&self, side: Stability, x: &RealVector) -> Result<RealVector> {
        self.check_dim(x.len())?;
        let sub = self.side(side);
        Ok(sub.basis.transpose() * (&sub.projection * x))
    }

    /// Lyapunov value `V(π x)` on `side`.
    pub fn lyapunov_value(&self, side: Stability, x: &RealVector) -> Result<f64> {
        let metric = self.side(side).metric.as_ref().ok_or(Error::EmptySubspace)?;
        Ok(metric.value(&self.coords(side, x)?))
    }

    fn member_coords(&self, side: Stability, x: &RealVector) -> Result<RealVector> {
        self.check_dim(x.len())?;
        let sub = self.side(side);
        let invalid = match side {
            Stability::Stable => Error::InvalidStableVector,
            Stability::Unstable => Error::InvalidUnstableVector,
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = x.norm();
        if norm == 0.0 {
            return Err(invalid);
        }
        let projected = &sub.projection * x;
        if (x - &projected).norm() > 1e-9 * norm {
            return Err(invalid);
        }
        Ok(sub.basis.transpose() * projected)
    }

    /// The unique `t` with `V(exp(tM)x) = 1` for nonzero `x ∈ E^s`.
    pub fn time_to_sphere(&self, x: &RealVector) -> Result<f64> {
        self.time_to_sphere_on(Stability::Stable, x)
    }

    /// As [`time_to_sphere`](Self::time_to_sphere) on either side; on the
    /// unstable side `V` grows along the forward flow.
    pub fn time_to_sphere_on(&self, side: Stability, x: &RealVector) -> Result<f64> {
        Ok(self.flow_to_sphere(side, x)?.0)
    }

    /// `(t, exp(tM)x)` with `exp(tM)x` on the sphere of `side`, flowed inside
    /// the subspace so the image stays on it.
    pub fn flow_to_sphere(&self, side: Stability, x: &RealVector) -> Result<(f64, RealVector)> {
        let sub = self.side(side);
        let metric = sub.metric.as_ref().ok_or(Error::EmptySubspace)?;
        let c0 = self.member_coords(side, x)?;
        let generator = match side {
            Stability::Stable => sub.generator.clone(),
            Stability::Unstable => -&sub.generator,
        };
        let tau = decreasing_root(&generator, &metric.p, &c0)?;
        let c = expm(&generator, tau)? * &c0;
        let t = match side {
            Stability::Stable => tau,
            Stability::Unstable => -tau,
        };
        Ok((t, &sub.basis * c))
    }

    fn on_sphere(&self, side: Stability, x: &RealVector) -> Result<()> {
        self.member_coords(side, x)?;
        let value = self.lyapunov_value(side, x)?;
        if (value - 1.0).abs() > SPHERE_TOL {
            return Err(Error::NotOnSphere { value });
        }
        Ok(())
    }

    fn check_member(&self, side: Stability, y: &RealVector) -> Result<()> {
        self.check_dim(y.len())?;
        let sub = self.side(side);
        if (y - &sub.projection * y).norm() > 1e-9 * (1.0 + y.norm()) {
            return Err(match side {
                Stability::Stable => Error::InvalidStableVector,
                Stability::Unstable => Error::InvalidUnstableVector,
            });
        }
        Ok(())
    }

    /// `ψ⁻(g, x, y) = g·(ix + iy)` for `x` on the stable sphere, `y ∈ E^u`.
    pub fn psi_minus(
        &self,
        ctx: &GroupContext,
        g: &GroupElement,
        x: &RealVector,
        y: &RealVector,
    ) -> Result<ComplexVector> {
        self.psi(ctx, Stability::Stable, g, x, y)
    }

    pub fn psi_minus_inv(&self, ctx: &GroupContext, z: &ComplexVector, tol: f64) -> Result<PsiPreimage> {
        self.psi_inv(ctx, Stability::Stable, z, tol)
    }

    /// `ψ⁺(g, x, y) = g·(ix + iy)` for `x` on the unstable sphere, `y ∈ E^s`.
    pub fn psi_plus(
        &self,
        ctx: &GroupContext,
        g: &GroupElement,
        x: &RealVector,
        y: &RealVector,
    ) -> Result<ComplexVector> {
        self.psi(ctx, Stability::Unstable, g, x, y)
    }

    pub fn psi_plus_inv(&self, ctx: &GroupContext, z: &ComplexVector, tol: f64) -> Result<PsiPreimage> {
        self.psi_inv(ctx, Stability::Unstable, z, tol)
    }

    fn psi(
        &self,
        ctx: &GroupContext,
        side: Stability,
        g: &GroupElement,
        x: &RealVector,
        y: &RealVector,
    ) -> Result<ComplexVector> {
        self.check_context(ctx)?;
        self.on_sphere(side, x)?;
        self.check_member(other(side), y)?;
        let im = (x + y).map(|v| Complex::new(0.0, v));
        ctx.act_affine(g, &im)
    }

    fn psi_inv(&self, ctx: &GroupContext, side: Stability, z: &ComplexVector, tol: f64) -> Result<PsiPreimage> {
        self.check_context(ctx)?;
        let parts = self.decompose(z)?;
        let (main, rest) = match side {
            Stability::Stable => (&parts.y_s, &parts.y_u),
            Stability::Unstable => (&parts.y_u, &parts.y_s),
        };
        if self.side(side).is_empty() || main.norm() / (1.0 + z.norm()) <= tol {
            return Err(match side {
                Stability::Stable => Error::NotInUMinus,
                Stability::Unstable => Error::NotInUPlus,
            });
        }
        let (t, x) = self.flow_to_sphere(side, main)?;
        let y = ctx.flow(t)? * rest;
        Ok(PsiPreimage {
            g: GroupElement::new(parts.b, -t),
            x,
            y,
        })
    }

    pub fn classify(&self, p: &ProjectivePoint, tol: f64) -> RegionLabel {
        self.classify_detailed(p, tol).label
    }

    pub fn classify_detailed(&self, p: &ProjectivePoint, tol: f64) -> Classification {
        match p.chart() {
            Ok(z) if z.len() == self.dim() => self.classify_chart(&z, tol),
            _ => Classification {
                label: RegionLabel::LimitSetInfinity,
                s: 0.0,
                u: 0.0,
                near_boundary: false,
            },
        }
    }

    /// Classification of the chart point `z`; `s = ‖π_s Im z‖/(1+‖z‖)` and
    /// likewise `u`.
    pub fn classify_chart(&self, z: &ComplexVector, tol: f64) -> Classification {
        let im = z.map(|c| c.im);
        let scale = 1.0 + z.norm();
        let s = (&self.stable.projection * &im).norm() / scale;
        let u = (&self.unstable.projection * &im).norm() / scale;
        let label = match (s > tol, u > tol) {
            (false, false) => RegionLabel::LimitSetChart,
            (true, false) => RegionLabel::OmegaMinusOnly,
            (false, true) => RegionLabel::OmegaPlusOnly,
            (true, true) => RegionLabel::Both,
        };
        let near = |v: f64| v > 0.5 * tol && v <= 2.0 * tol;
        Classification {
            label,
            s,
            u,
            near_boundary: near(s) || near(u),
        }
    }

    /// Sequence `w_n → z2` whose images under `g_n = (Re z1 − A(n)Re z2, n)`
    /// converge to `z1` while `g_n` leaves every compact set, for
    /// `z1 ∈ U⁺∖U⁻`, `z2 ∈ U⁻∖U⁺`.
    pub fn divergence_witness(
        &self,
        ctx: &GroupContext,
        z1: &ComplexVector,
        z2: &ComplexVector,
        n_max: usize,
        tol: f64,
    ) -> Result<WitnessTable> {
        self.check_context(ctx)?;
        self.check_dim(z1.len())?;
        self.check_dim(z2.len())?;
        if self.classify_chart(z1, tol).label != RegionLabel::OmegaPlusOnly
            || self.classify_chart(z2, tol).label != RegionLabel::OmegaMinusOnly
        {
            return Err(Error::WrongRegions);
        }
        let (b1, y1) = (z1.map(|c| c.re), z1.map(|c| c.im));
        let (b2, y2) = (z2.map(|c| c.re), z2.map(|c| c.im));
        let rows = (1..=n_max)
            .map(|n| {
                let n_f = n as f64;
                let forward = ctx.flow(n_f)?;
                let back = ctx.flow(-n_f)?;
                let w = b2.zip_map(&(back * &y1 + &y2), Complex::new);
                let g = GroupElement::new(&b1 - &forward * &b2, n_f);
                let image = ctx.act_affine(&g, &w)?;
                Ok(WitnessRow {
                    n,
                    dist_w: (&w - z2).norm(),
                    dist_image: (&image - z1).norm(),
                    w,
                    g,
                    image,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n0 = monotone_from(&rows);
        Ok(WitnessTable { rows, n0 })
    }

    /// `f₁(x) = A(t(Bx))·Bx` on the stable sphere and `f₂(x) = A(t(Bx))·B`
    /// on `E^u` in basis coordinates.
    pub fn induced_sphere_map(&self, ctx: &GroupContext, x: &RealVector) -> Result<SphereMap> {
        self.check_context(ctx)?;
        let lattice = ctx.lift().ok_or(Error::MissingLattice)?.lattice.to_real();
        self.on_sphere(Stability::Stable, x)?;
        let bx = &lattice * x;
        let residual = (&self.unstable.projection * &bx).norm() / bx.norm();
        if residual > 1e-9 {
            return Err(Error::SplitMismatch { residual });
        }
        let (t, f1) = self.flow_to_sphere(Stability::Stable, &(&self.stable.projection * &bx))?;
        let vu = &self.unstable.basis;
        let f2 = vu.transpose() * ctx.flow(t)? * &lattice * vu;
        Ok(SphereMap { t, f1, f2 })
    }

    /// Labels of a two-dimensional slice through `spec.base`.
    pub fn classify_grid(&self, spec: &GridSpec) -> Result<Vec<GridCell>> {
        self.check_dim(spec.base.len())?;
        if spec.resolution == 0 {
            return Err(Error::InvalidArgument("grid resolution must be positive".into()));
        }
        let dirs = [self.axis_direction(spec.axes[0])?, self.axis_direction(spec.axes[1])?];
        let res = spec.resolution;
        let coord = |k: usize, i: usize| spec.lo[k] + i as f64 * (spec.hi[k] - spec.lo[k]) / res as f64;
        let cells = (0..res * res)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / res, idx % res);
                let (a, b) = (coord(0, i), coord(1, j));
                let z = &spec.base + &dirs[0] * Complex::from(a) + &dirs[1] * Complex::from(b);
                let class = self.classify_chart(&z, spec.tol);
                GridCell {
                    i,
                    j,
                    a,
                    b,
                    label: class.label,
                    near_boundary: class.near_boundary,
                }
            })
            .collect();
        Ok(cells)
    }

    fn axis_direction(&self, axis: Axis) -> Result<ComplexVector> {
        let n = self.dim();
        let column = |basis: &RealMatrix, k: usize| -> Result<ComplexVector> {
            if k >= basis.ncols() {
                return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
            }
            Ok(basis.column(k).map(|v| Complex::new(0.0, v)))
        };
        match axis {
            Axis::Re(k) if k < n => {
                let mut v = ComplexVector::zeros(n);
                v[k] = Complex::new(1.0, 0.0);
                Ok(v)
            }
            Axis::Re(_) => Err(Error::InvalidArgument(format!("axis {axis} out of range"))),
            Axis::ImStable(k) => column(&self.stable.basis, k),
            Axis::ImUnstable(k) => column(&self.unstable.basis, k),
        }
    }
}

fn other(side: Stability) -> Stability {
    match side {
        Stability::Stable => Stability::Unstable,
        Stability::Unstable => Stability::Stable,
    }
}

/// Root of `τ ↦ V(exp(τG)c) − 1`, strictly decreasing since
/// `d/dτ V = −‖exp(τG)c‖²`. Doubling bracket, bisection, Newton polish.
fn decreasing_root(generator: &RealMatrix, p: &RealMatrix, c0: &RealVector) -> Result<f64> {
    let eval = |tau: f64| -> Result<(f64, f64)> {
        let c = expm(generator, tau)? * c0;
        Ok((c.dot(&(p * &c)), c.norm_squared()))
    };
    let (v0, _) = eval(0.0)?;
    if v0 == 1.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi): (f64, f64) = if v0 > 1.0 { (0.0, 1.0) } else { (-1.0, 0.0) };
    loop {
        if hi.abs().max(lo.abs()) > 1e6 {
            return Err(Error::NoConvergence("time-to-sphere bracket"));
        }
        if v0 > 1.0 {
            if eval(hi)?.0 <= 1.0 {
                break;
            }
            lo = hi;
            hi *= 2.0;
        } else {
            if eval(lo)?.0 >= 1.0 {
                break;
            }
            hi = lo;
            lo *= 2.0;
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * lo.abs().max(hi.abs()).max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if eval(mid)?.0 > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut tau = 0.5 * (lo + hi);
    let (mut v, mut slope) = eval(tau)?;
    for _ in 0..4 {
        let next = tau + (v - 1.0) / slope;
        let (v_next, slope_next) = eval(next)?;
        if (v_next - 1.0).abs() >= (v - 1.0).abs() {
            break;
        }
        (tau, v, slope) = (next, v_next, slope_next);
    }
    Ok(tau)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessRow {
    pub n: usize,
    pub w: ComplexVector,
    pub g: GroupElement,
    pub image: ComplexVector,
    pub dist_w: f64,
    pub dist_image: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessTable {
    pub rows: Vec<WitnessRow>,
    /// First `n` from which both distance columns are non-increasing.
    pub n0: usize,
}

fn monotone_from(rows: &[WitnessRow]) -> usize {
    let mut start = rows.first().map_or(0, |r| r.n);
    for pair in rows.windows(2) {
        if pair[1].dist_w > pair[0].dist_w || pair[1].dist_image > pair[0].dist_image {
            start = pair[1].n;
        }
    }
    start
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereMap {
    pub t: f64,
    pub f1: RealVector,
    pub f2: RealMatrix,
}

/// Real coordinate of a grid slice: a component of `Re z`, or the
/// coefficient of `Im z` along a stable or unstable basis vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Re(usize),
    ImStable(usize),
    ImUnstable(usize),
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Re(k) => write!(f, "re{k}"),
            Axis::ImStable(k) => write!(f, "ims{k}"),
            Axis::ImUnstable(k) => write!(f, "imu{k}"),
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown axis {s:?}"));
        let (ctor, rest): (fn(usize) -> Axis, &str) = if let Some(r) = s.strip_prefix("ims") {
            (Axis::ImStable, r)
        } else if let Some(r) = s.strip_prefix("imu") {
            (Axis::ImUnstable, r)
        } else if let Some(r) = s.strip_prefix("re") {
            (Axis::Re, r)
        } else {
            return Err(bad());
        };
        rest.parse().map(ctor).map_err(|_| bad())
    }
}

/// Slice `base + a·e₀ + b·e₁` with `a = lo₀ + i·(hi₀ − lo₀)/res` for
/// `i < res`, and likewise `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub axes: [Axis; 2],
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub resolution: usize,
    pub base: ComplexVector,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub i: usize,
    pub j: usize,
    pub a: f64,
    pub b: f64,
    pub label: RegionLabel,
    pub near_boundary: bool,
}

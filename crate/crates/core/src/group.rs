//! The semidirect product `R^N ⋊_A R` with `A(t) = exp(tM)`, its lattice
//! `Z^N ⋊_B Z`, and their actions on `C^N` and `P^N_C`.
//!
//! Group law: `(b, t)·(c, s) = (b + A(t)c, t + s)`, represented by the block
//! matrix `[[A(t), b], [0, 1]]`.

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::linalg::{self, eigenvalues, expm, logm, IntMatrix};
use crate::{Complex, ComplexVector, Error, RealMatrix, RealVector, Result};

/// Relative size of the last homogeneous coordinate below which a projective
/// point lies on the hyperplane at infinity.
pub const INFINITY_TOL: f64 = 1e-12;

/// Element `(b, t)` of `R^N ⋊_A R`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    pub b: RealVector,
    pub t: f64,
}

impl GroupElement {
    pub fn new(b: RealVector, t: f64) -> Self {
        Self { b, t }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(RealVector::zeros(dim), 0.0)
    }

    pub fn translation(b: RealVector) -> Self {
        Self::new(b, 0.0)
    }

    pub fn flow(dim: usize, t: f64) -> Self {
        Self::new(RealVector::zeros(dim), t)
    }
}

/// Element `(b, n)` of `Z^N ⋊_B Z`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatticeElement {
    pub b: Vec<BigInt>,
    pub n: i64,
}

impl LatticeElement {
    pub fn new<T: Into<BigInt>>(b: impl IntoIterator<Item = T>, n: i64) -> Self {
        Self {
            b: b.into_iter().map(Into::into).collect(),
            n,
        }
    }

    pub fn b_real(&self) -> RealVector {
        RealVector::from_iterator(
            self.b.len(),
            self.b.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)),
        )
    }
}

/// Lie algebra element `[[s·M, p], [0, 0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebraElement {
    pub s: f64,
    pub p: RealVector,
}

impl LieAlgebraElement {
    /// Coordinates `(s, p₁, …, p_N)` used by [`GroupContext::adjoint_matrix`].
    pub fn coords(&self) -> RealVector {
        let mut v = RealVector::zeros(self.p.len() + 1);
        v[0] = self.s;
        v.rows_mut(1, self.p.len()).copy_from(&self.p);
        v
    }

    pub fn from_coords(v: &RealVector) -> Self {
        Self {
            s: v[0],
            p: v.rows(1, v.len() - 1).into_owned(),
        }
    }
}

/// Element of the possibly disconnected lift `{C = A(t)} ∪ {C = B·A(t)}`:
/// linear part `B^flipped · A(t)`, translation `base.b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftElement {
    pub base: GroupElement,
    pub flipped: bool,
}

/// An affine map `z ↦ L z + v` with real `L` and `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub linear: RealMatrix,
    pub translation: RealVector,
}

impl AffineMap {
    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    /// Block matrix `[[L, v], [0, 1]]`.
    pub fn rho(&self) -> RealMatrix {
        let n = self.dim();
        let mut r = RealMatrix::identity(n + 1, n + 1);
        r.view_mut((0, 0), (n, n)).copy_from(&self.linear);
        r.view_mut((0, n), (n, 1)).copy_from(&self.translation);
        r
    }

    pub fn apply_real(&self, x: &RealVector) -> RealVector {
        &self.linear * x + &self.translation
    }

    /// `L z + v`; `L` acts on real and imaginary parts separately.
    pub fn apply(&self, z: &ComplexVector) -> ComplexVector {
        let re = self.apply_real(&z.map(|c| c.re));
        let im = &self.linear * z.map(|c| c.im);
        re.zip_map(&im, Complex::new)
    }

    pub fn apply_projective(&self, p: &ProjectivePoint) -> ProjectivePoint {
        let rho = self.rho().map(Complex::from);
        ProjectivePoint::new(rho * p.coords())
            .expect("invertible map sends nonzero vectors to nonzero vectors")
    }
}

/// Point of `P^N_C`, stored as a unit vector whose first nonzero coordinate is
/// real and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectivePoint {
    coords: ComplexVector,
}

impl ProjectivePoint {
    pub fn new(coords: ComplexVector) -> Result<Self> {
        if coords.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::NonFinite);
        }
        let norm = coords.norm();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        let mut coords = coords / Complex::from(norm);
        if let Some(lead) = coords.iter().copied().find(|c| c.norm() > 1e-14) {
            let phase = lead.conj() / lead.norm();
            coords *= phase;
        }
        Ok(Self { coords })
    }

    /// Inverse of the chart: `z ↦ [z : 1]`.
    pub fn unchart(z: &ComplexVector) -> Self {
        let n = z.len();
        let mut v = ComplexVector::zeros(n + 1);
        v.rows_mut(0, n).copy_from(z);
        v[n] = Complex::new(1.0, 0.0);
        Self::new(v).expect("last coordinate is one")
    }

    /// Complex dimension `N` of the projective space.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn coords(&self) -> &ComplexVector {
        &self.coords
    }

    pub fn is_at_infinity(&self) -> bool {
        self.coords[self.dim()].norm() <= INFINITY_TOL
    }

    /// Chart `[z₁ : … : z_N : 1] ↦ (z₁, …, z_N)`.
    pub fn chart(&self) -> Result<ComplexVector> {
        if self.is_at_infinity() {
            return Err(Error::PointAtInfinity);
        }
        let n = self.dim();
        let last = self.coords[n];
        Ok(self.coords.rows(0, n).map(|c| c / last))
    }

    /// Chordal (Fubini–Study sine) distance, in `[0, 1]`.
    pub fn distance(&self, other: &ProjectivePoint) -> f64 {
        // ‖q − ⟨p, q⟩ p‖ avoids the cancellation in sqrt(1 − |⟨p, q⟩|²)
        let overlap = self.coords.dotc(&other.coords);
        (&other.coords - &self.coords * overlap).norm().min(1.0)
    }
}

/// Integer lattice data attached to a context: `exp(M) = B^power`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lift {
    pub lattice: IntMatrix,
    pub power: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Connected,
    Disconnected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NilradicalReport {
    pub nilradical_is_rn: bool,
    pub group_is_nilpotent: bool,
}

/// Generator `M` of `A(t) = exp(tM)` plus optional lattice data.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupContext {
    generator: RealMatrix,
    lift: Option<Lift>,
}

impl GroupContext {
    pub fn new(generator: RealMatrix) -> Result<Self> {
        linalg::ensure_square(&generator)?;
        linalg::ensure_finite(&generator)?;
        Ok(Self {
            generator,
            lift: None,
        })
    }

    /// Context for a lattice matrix `B`, using a real logarithm of `B` or of
    /// `B²` as the generator.
    pub fn from_lattice(b: IntMatrix) -> Result<Self> {
        let log = logm(&b.to_real())?;
        Self::with_lift(log.log, b, log.power)
    }

    /// Checks `exp(M) = B^power` to `1e-9` entrywise.
    pub fn with_lift(generator: RealMatrix, lattice: IntMatrix, power: u8) -> Result<Self> {
        let mut ctx = Self::new(generator)?;
        if lattice.dim() != ctx.dim() {
            return Err(Error::DimensionMismatch {
                expected: ctx.dim(),
                found: lattice.dim(),
            });
        }
        if !(power == 1 || power == 2) {
            return Err(Error::InvalidArgument(format!("lift power {power}")));
        }
        let target = lattice.pow(power as i64)?.to_real();
        let residual = (expm(&ctx.generator, 1.0)? - target).abs().max();
        if residual > 1e-9 {
            return Err(Error::Inconsistent { residual });
        }
        ctx.lift = Some(Lift { lattice, power });
        Ok(ctx)
    }

    pub fn dim(&self) -> usize {
        self.generator.nrows()
    }

    pub fn generator(&self) -> &RealMatrix {
        &self.generator
    }

    pub fn lift(&self) -> Option<&Lift> {
        self.lift.as_ref()
    }

    pub fn connectivity(&self) -> Connectivity {
        match &self.lift {
            Some(l) if l.power == 2 => Connectivity::Disconnected,
            _ => Connectivity::Connected,
        }
    }

    fn lattice(&self) -> Result<&Lift> {
        self.lift.as_ref().ok_or(Error::MissingLattice)
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

    /// `A(t) = exp(tM)`.
    pub fn flow(&self, t: f64) -> Result<RealMatrix> {
        expm(&self.generator, t)
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement::identity(self.dim())
    }

    pub fn compose(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        self.check_dim(g.b.len())?;
        self.check_dim(h.b.len())?;
        let a = self.flow(g.t)?;
        Ok(GroupElement::new(&g.b + a * &h.b, g.t + h.t))
    }

    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement> {
        self.check_dim(g.b.len())?;
        let a = self.flow(-g.t)?;
        Ok(GroupElement::new(-(a * &g.b), -g.t))
    }

    pub fn affine(&self, g: &GroupElement) -> Result<AffineMap> {
        self.check_dim(g.b.len())?;
        Ok(AffineMap {
            linear: self.flow(g.t)?,
            translation: g.b.clone(),
        })
    }

    /// `ρ(b, t) = [[A(t), b], [0, 1]]`.
    pub fn rho(&self, g: &GroupElement) -> Result<RealMatrix> {
        Ok(self.affine(g)?.rho())
    }

    pub fn act_affine(&self, g: &GroupElement, z: &ComplexVector) -> Result<ComplexVector> {
        self.check_dim(z.len())?;
        Ok(self.affine(g)?.apply(z))
    }

    pub fn act_projective(&self, g: &GroupElement, p: &ProjectivePoint) -> Result<ProjectivePoint> {
        self.check_dim(p.dim())?;
        Ok(self.affine(g)?.apply_projective(p))
    }

    /// Lattice element as an affine map, using the exact power `Bⁿ`.
    pub fn lattice_affine(&self, g: &LatticeElement) -> Result<AffineMap> {
        let lift = self.lattice()?;
        self.check_dim(g.b.len())?;
        Ok(AffineMap {
            linear: lift.lattice.pow(g.n)?.to_real(),
            translation: g.b_real(),
        })
    }

    /// `ρ(b, n) = [[Bⁿ, b], [0, 1]]`.
    pub fn rho_lattice(&self, g: &LatticeElement) -> Result<RealMatrix> {
        Ok(self.lattice_affine(g)?.rho())
    }

    /// Exact product `(b₁, n₁)·(b₂, n₂) = (b₁ + B^{n₁} b₂, n₁ + n₂)`.
    pub fn lattice_compose(&self, g: &LatticeElement, h: &LatticeElement) -> Result<LatticeElement> {
        let lift = self.lattice()?;
        self.check_dim(g.b.len())?;
        self.check_dim(h.b.len())?;
        let moved = lift.lattice.pow(g.n)?.mul_vec(&h.b);
        Ok(LatticeElement {
            b: g.b.iter().zip(moved).map(|(x, y)| x + y).collect(),
            n: g.n + h.n,
        })
    }

    pub fn lattice_inverse(&self, g: &LatticeElement) -> Result<LatticeElement> {
        let lift = self.lattice()?;
        let moved = lift.lattice.pow(-g.n)?.mul_vec(&g.b);
        Ok(LatticeElement {
            b: moved.into_iter().map(|x| -x).collect(),
            n: -g.n,
        })
    }

    /// Element of the lift with linear part `B^flipped · A(t)`, normalised so
    /// that `flipped` is only set when `B` is not itself `A(1)`.
    pub fn lift_element(&self, base: GroupElement, flipped: bool) -> Result<LiftElement> {
        let lift = self.lattice()?;
        Ok(if flipped && lift.power == 1 {
            LiftElement {
                base: GroupElement::new(base.b, base.t + 1.0),
                flipped: false,
            }
        } else {
            LiftElement { base, flipped }
        })
    }

    /// The lattice element `(b, n)` inside the lift.
    pub fn lift_of(&self, g: &LatticeElement) -> Result<LiftElement> {
        let lift = self.lattice()?;
        let b = g.b_real();
        Ok(match lift.power {
            1 => LiftElement {
                base: GroupElement::new(b, g.n as f64),
                flipped: false,
            },
            _ => LiftElement {
                base: GroupElement::new(b, g.n.div_euclid(2) as f64),
                flipped: g.n.rem_euclid(2) == 1,
            },
        })
    }

    pub fn lift_affine(&self, g: &LiftElement) -> Result<AffineMap> {
        let mut map = self.affine(&g.base)?;
        if g.flipped {
            map.linear = self.lattice()?.lattice.to_real() * map.linear;
        }
        Ok(map)
    }

    /// Product in the lift; `B` commutes with `A(t)` and `B² = A(1)` when
    /// flipped elements exist.
    pub fn lift_compose(&self, g: &LiftElement, h: &LiftElement) -> Result<LiftElement> {
        let linear = self.lift_affine(g)?.linear;
        let both = g.flipped && h.flipped;
        let t = g.base.t + h.base.t + if both { 1.0 } else { 0.0 };
        let b = &g.base.b + linear * &h.base.b;
        self.lift_element(GroupElement::new(b, t), g.flipped ^ h.flipped)
    }

    pub fn lift_inverse(&self, g: &LiftElement) -> Result<LiftElement> {
        let inv_linear = linalg::inverse(&self.lift_affine(g)?.linear)?;
        let b = -(inv_linear * &g.base.b);
        // (B·A(t))⁻¹ = A(−t)·B⁻¹ = B·A(−t−1) when B² = A(1)
        let t = if g.flipped { -g.base.t - 1.0 } else { -g.base.t };
        self.lift_element(GroupElement::new(b, t), g.flipped)
    }

    /// Matrix of `Ad_g` on coordinates `(s, p)`: `(s, p) ↦ (s, −s·M·b + A(t)·p)`.
    pub fn adjoint_matrix(&self, g: &GroupElement) -> Result<RealMatrix> {
        self.check_dim(g.b.len())?;
        let n = self.dim();
        let mut ad = RealMatrix::zeros(n + 1, n + 1);
        ad[(0, 0)] = 1.0;
        let mb = -(&self.generator * &g.b);
        ad.view_mut((1, 0), (n, 1)).copy_from(&mb);
        ad.view_mut((1, 1), (n, n)).copy_from(&self.flow(g.t)?);
        Ok(ad)
    }

    pub fn adjoint(&self, g: &GroupElement, x: &LieAlgebraElement) -> Result<LieAlgebraElement> {
        let coords = self.adjoint_matrix(g)? * x.coords();
        Ok(LieAlgebraElement::from_coords(&coords))
    }

    /// `R^N` is the nilradical iff `M` has a nonzero eigenvalue; otherwise the
    /// whole group is nilpotent. `tol` is relative to `max(1, ‖M‖₂)`.
    pub fn nilradical_test(&self, tol: f64) -> Result<NilradicalReport> {
        let scale = linalg::operator_norm(&self.generator)?.max(1.0);
        let nonzero = eigenvalues(&self.generator)?
            .iter()
            .any(|l| l.norm() > tol * scale);
        Ok(NilradicalReport {
            nilradical_is_rn: nonzero,
            group_is_nilpotent: !nonzero,
        })
    }
}

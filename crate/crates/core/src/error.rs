use num_bigint::BigInt;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite input")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("magnitude overflow")]
    MagnitudeOverflow,
    #[error("not invertible")]
    NotInvertible,
    #[error("no real logarithm found")]
    NoRealLogarithm,
    #[error("not hyperbolic (spectral margin {margin:e})")]
    NotHyperbolic { margin: f64 },
    #[error("not stable")]
    NotStable,
    #[error("conditioning failure (condition estimate {condition:e})")]
    ConditioningFailure { condition: f64 },
    #[error("not unimodular (det = {det})")]
    NotUnimodular { det: BigInt },
    #[error("not in SL(N,Z) (det = {det})")]
    NotInSl { det: BigInt },
    #[error("not integral (max entry deviation {max_deviation:e})")]
    NonIntegral { max_deviation: f64 },
    #[error("consistency residual {residual:e} exceeds tolerance")]
    Inconsistent { residual: f64 },
    #[error("point at infinity")]
    PointAtInfinity,
    #[error("zero vector is not a projective point")]
    ZeroVector,
    #[error("invalid stable vector")]
    InvalidStableVector,
    #[error("invalid unstable vector")]
    InvalidUnstableVector,
    #[error("not on sphere (V = {value})")]
    NotOnSphere { value: f64 },
    #[error("not in U-minus")]
    NotInUMinus,
    #[error("not in U-plus")]
    NotInUPlus,
    #[error("empty subspace")]
    EmptySubspace,
    #[error("wrong regions")]
    WrongRegions,
    #[error("split mismatch (residual {residual:e})")]
    SplitMismatch { residual: f64 },
    #[error("invariant subspace residual {residual:e} exceeds tolerance")]
    SplitResidual { residual: f64 },
    #[error("n must be nonzero")]
    ZeroPower,
    #[error("empty sweep")]
    EmptySweep,
    #[error("epsilon {0} out of range (0, 1/2]")]
    EpsilonOutOfRange(f64),
    #[error("context has no integer lattice matrix")]
    MissingLattice,
    #[error("iteration failed to converge: {0}")]
    NoConvergence(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElasticError {
    #[error("all points are identical; no curve exists")]
    AllPointsIdentical,
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("invalid warping: {0}")]
    InvalidWarping(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parameter {0} lies outside [0, 1]")]
    OutOfDomain(f64),
    #[error("invalid spline basis: {0}")]
    InvalidBasis(String),
    #[error("design matrix is rank deficient: {0}")]
    RankDeficient(String),
    #[error("lattice size {0} exceeds the brute-force limit of 60")]
    GridTooLarge(usize),
    #[error("predicted derivative vanishes almost everywhere; the closed prediction degenerates to a point")]
    DegeneratePrediction,
    #[error("empirical covariance of the covariates is singular; drop collinear covariates")]
    SingularCovariance,
    #[error("all curves are re-parametrizations of a single image; total variation is zero")]
    ZeroTotalVariation,
    #[error("not enough degrees of freedom: n = {n}, k = {k}")]
    DegreesOfFreedom { n: usize, k: usize },
    #[error("confidence region would be empty: ceil((1 - alpha) * {0}) < 1")]
    InsufficientSamples(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = ElasticError> = std::result::Result<T, E>;

use alloc::string::String;

/// Errors raised by core operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("site {site} outside a chain of {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("empty region")]
    EmptyRegion,
    #[error("regions overlap")]
    Overlap,
    #[error("region is not contained in the operator support")]
    NotInSupport,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("operator is not hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("not a density operator: {0}")]
    NotDensity(String),
    #[error("singular operator (smallest eigenvalue {0:e})")]
    Singular(f64),
    #[error("potential is not commuting (max commutator norm {0:e})")]
    NonCommuting(f64),
    #[error("state is not a Markov chain for this tripartition (log defect {0:e})")]
    NotMarkov(f64),
    #[error("blocks have overlapping boundaries")]
    OverlappingBoundaries,
    #[error("negative evolution time {0}")]
    NegativeTime(f64),
    #[error("integrator failure: {0}")]
    Integrator(String),
    #[error("all samples are degenerate")]
    AllDegenerate,
    #[error("mixing condition fails: h-norm {0} is not below 1/2")]
    NoCertificate(f64),
}

pub type Result<T> = core::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid local dimension {0}: need at least 2 levels")]
    InvalidDimension(usize),
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("jump level {level} out of range for local dimension {dim}")]
    InvalidLevel { level: usize, dim: usize },
    #[error("site {site} out of range for {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("Hilbert space dimension {dim} exceeds the dense budget {budget}")]
    TooLarge { dim: usize, budget: usize },
    #[error(
        "steady state is degenerate or ill-conditioned (two smallest singular values {sigma:?}, residual {residual:e})"
    )]
    DegenerateSteadyState { sigma: [f64; 2], residual: f64 },
    #[error("integrator unstable: trace drifted by {drift:e}; use a smaller time step than {dt}")]
    UnstableStep { drift: f64, dt: f64 },
    #[error("correlation undefined: site {site} has zero density")]
    UndefinedCorrelation { site: usize },
    #[error("observable expected real, imaginary part is {0:e}")]
    NonRealObservable(f64),
    #[error("correlation-length fit failed: {0}")]
    FitFailure(String),
    #[error("momentum construction requires periodic boundary conditions")]
    UnsupportedBoundary,
    #[error("mode index {k} out of range for {n} modes")]
    ModeOutOfRange { k: usize, n: usize },
    #[error("linear algebra failure: {0}")]
    Numerical(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

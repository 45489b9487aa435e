use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not reach tolerance {tol:e} on [{a}, {b}]")]
    Quadrature { a: f64, b: f64, tol: f64 },

    #[error("construction error: {0}")]
    Construction(String),

    #[error("degenerate potential: {0}")]
    PotentialDegenerate(String),

    #[error("distance is infinite: {0}")]
    InfiniteDistance(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("experiment error: {0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Domain(_) => "domain",
            Self::InvalidParameter(_) => "invalid_parameter",
            Self::Quadrature { .. } => "quadrature",
            Self::Construction(_) => "construction",
            Self::PotentialDegenerate(_) => "potential_degenerate",
            Self::InfiniteDistance(_) => "infinite_distance",
            Self::Numeric(_) => "numeric",
            Self::Experiment(_) => "experiment",
            Self::Io(_) => "io",
            Self::Json(_) => "json",
        }
    }
}

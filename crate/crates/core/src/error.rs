use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("no records remain after filtering")]
    EmptyTable,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("rank-deficient design; collinear columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("non-finite objective at {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("quadrature failed for k={k}, mu={mu}, sigma={sigma}: {detail}")]
    Quadrature {
        k: u64,
        mu: f64,
        sigma: f64,
        detail: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::NonFinite { .. }
                | Error::Quadrature { .. }
                | Error::Numerical(_)
                | Error::Degenerate(_)
        )
    }
}

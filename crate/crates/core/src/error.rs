use thiserror::Error;

/// Errors raised by the pricing library.
#[derive(Debug, Error)]
pub enum PricingError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate elasticity: beta'y = {0} must be negative")]
    DegenerateElasticity(f64),

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("no parameter at distance {v_true} from theta* inside the parameter box")]
    InfeasibleBias { v_true: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("policy contract violated: {0}")]
    Contract(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, PricingError>;

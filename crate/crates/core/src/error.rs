use thiserror::Error;

pub type Result<T> = std::result::Result<T, FrtbError>;

#[derive(Debug, Error)]
pub enum FrtbError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Validation(String),

    /// ES^{R,C} of a class vanishes while the class still carries exposure,
    /// so the stress ratio is 0/0 or x/0.
    #[error("degenerate stress-ratio denominator for class {class}: ES(reduced, current) = {value:e}")]
    DegenerateDenominator { class: &'static str, value: f64 },

    #[error("tail tie detected in bucket ({class}, {horizon}d): re-draw with another seed")]
    TailTie { class: &'static str, horizon: u32 },

    #[error("oracle failed: {0}")]
    Oracle(String),

    #[error("unknown preset `{name}`; available: {available}")]
    UnknownPreset { name: String, available: String },

    #[error("correlation matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPsd(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

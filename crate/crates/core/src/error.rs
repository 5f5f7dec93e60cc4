use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // SMILES parsing. Positions are byte offsets into the input string.
    #[error("empty SMILES input")]
    EmptyInput,
    #[error("unmatched ring bond {label} opened at position {position}")]
    UnmatchedRingBond { label: u32, position: usize },
    #[error("unknown element '{symbol}' at position {position}")]
    UnknownElement { symbol: String, position: usize },
    #[error("unbalanced parenthesis at position {position}")]
    UnbalancedParenthesis { position: usize },
    #[error("invalid SMILES syntax at position {position}: {reason}")]
    Syntax { position: usize, reason: String },

    #[error("molecule is empty after preprocessing")]
    EmptyAfterPreprocess,
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("labels contain a single class")]
    DegenerateLabels,

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error(
        "invalid Hann scale parameters: J + 1 - R must be positive (J = {scales}, R = {overlap})"
    )]
    InvalidScaleParams { scales: usize, overlap: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("image size {size} is too small (minimum {min})")]
    SizeTooSmall { size: usize, min: usize },
    #[error("all pairwise distances are equal; kernel bandwidth would be zero")]
    ZeroVariance,

    #[error("invalid format: {0}")]
    Format(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable category, printed by the CLI on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::EmptyInput
            | Error::UnmatchedRingBond { .. }
            | Error::UnknownElement { .. }
            | Error::UnbalancedParenthesis { .. }
            | Error::Syntax { .. } => "parse",
            Error::EmptyAfterPreprocess => "preprocess",
            Error::DegenerateSplit(_) | Error::DegenerateLabels => "data",
            Error::NotSymmetric { .. } | Error::NoConvergence { .. } | Error::ZeroVariance => {
                "numeric"
            }
            Error::InvalidScaleParams { .. } | Error::Config(_) => "config",
            Error::DimensionMismatch(_) | Error::ShapeMismatch(_) | Error::SizeTooSmall { .. } => {
                "shape"
            }
            Error::Format(_) => "format",
            Error::Io(_) | Error::Csv(_) => "io",
        }
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal mass {off:.3e})")]
    NoConvergence { sweeps: usize, off: f64 },
    #[error("operator is not a partial isometry (residual {residual:.3e})")]
    NotPartialIsometry { residual: f64 },
    #[error("operator is not a projection (residual {residual:.3e})")]
    NotProjection { residual: f64 },
    #[error("partial isometry is not extremal (block {block} has both defects)")]
    NotExtremal { block: usize },
    #[error("rank {rank} exceeds min dimension {max} in block {block}")]
    RankTooLarge { block: usize, rank: usize, max: usize },
    #[error("ambiguous numerical rank: singular value {value:.3e} inside guard band around cutoff {cutoff:.3e}")]
    IllConditioned { value: f64, cutoff: f64 },
    #[error("corner p·a·q is singular in block {block}")]
    CornerSingular { block: usize },
    #[error("p0·a·s is not nilpotent (residual {residual:.3e})")]
    NotNilpotent { residual: f64 },
    #[error("operands too far apart: distance {distance:.6} must be below {limit:.6}")]
    TooFar { distance: f64, limit: f64 },
    #[error("path step {step:.4} exceeds the maximum {max:.4} after refinement")]
    StepTooLarge { step: f64, max: f64 },
    #[error("defect supports conflict in block {block}")]
    PatternConflict { block: usize },
    #[error("witness is not a nonzero element of the defect corner (residual {residual:.3e})")]
    BadWitness { residual: f64 },
    #[error("distance {distance:.6} is outside the range [0, sqrt 2] of the extremal bound")]
    OutOfRange { distance: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cannot parse input: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

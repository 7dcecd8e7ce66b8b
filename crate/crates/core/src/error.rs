use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("loop weights differ: {0} vs {1}")]
    RhoMismatch(f64, f64),
    #[error("|λ| = {0} lies outside the annulus of convergence")]
    OutsideAnnulus(f64),
    #[error("{samples} samples cannot resolve {modes} modes (need more than 2N)")]
    Undersampled { samples: usize, modes: usize },
    #[error("matrix is singular at a circle sample (|det| = {0:e})")]
    Singular(f64),
    #[error("spectral factorization did not converge after {0} block rows")]
    FactorizationDiverged(usize),
    #[error("eigenvalue {0} lies on the branch cut of the logarithm")]
    BranchCut(String),
    #[error("branch tracking across z = 0 is not possible")]
    BranchThroughZero,
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("graph is not balanced (max |F_j| = {0:e})")]
    NotBalanced(f64),
    #[error("graph is degenerate (rank {rank}, need {needed})")]
    Degenerate { rank: usize, needed: usize },
    #[error("t > 0 requires a tree graph")]
    NotATree,
    #[error("unknown vector does not match the graph layout: {0}")]
    LayoutMismatch(String),
    #[error("path passes through a pole near {0}")]
    PoleOnPath(String),
    #[error("ODE step size underflow near {0}")]
    StepUnderflow(String),
    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("truncation insufficient: dropped tail {tail:e} exceeds {threshold:e}")]
    TruncationInsufficient { tail: f64, threshold: f64 },
    #[error("frame is not unitary at λ = 1 (defect {0:e})")]
    NotUnitary(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

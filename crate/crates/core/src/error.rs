use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the library. The CLI maps `BranchCut` and `FitUnderdetermined`
/// to the numerical-guard exit code; everything else is an input/domain error.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}x{0} vs {1}x{1}")]
    DimensionMismatch(usize, usize),

    #[error("matrix is not Hermitian: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { defect: f64, tol: f64 },

    #[error("matrix is not unitary: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotUnitary { defect: f64, tol: f64 },

    #[error(
        "eigenphase {phase:.6} rad lies within {margin} rad of the log branch cut at \u{00b1}\u{03c0}; \
         reduce the evolution time"
    )]
    BranchCut { phase: f64, margin: f64 },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid level system: {0}")]
    InvalidSystem(String),

    #[error("invalid pulse sequence: {0}")]
    InvalidSequence(String),

    #[error("pulse count must be a positive even integer, got {0}")]
    OddPulseCount(usize),

    #[error("delta1 = {value} outside the feasibility interval ({lo:.6}, {hi:.6})")]
    OutsideFeasibleInterval { value: f64, lo: f64, hi: f64 },

    #[error("branch {branch} infeasible: delta{index} = {value:.12} not in (0, 1)")]
    BranchInfeasible {
        branch: &'static str,
        index: usize,
        value: f64,
    },

    #[error("unsupported Magnus order {0}; orders 1..=3 are implemented")]
    UnsupportedOrder(u32),

    #[error("unsupported pulse count n = {0} for this operation")]
    UnsupportedPulseCount(usize),

    #[error("evolution time must be positive, got {0}")]
    NonpositiveTime(f64),

    #[error(
        "scaling fit underdetermined: only {usable} of {total} grid points above the noise \
         floor; widen the evolution-time range"
    )]
    FitUnderdetermined { usable: usize, total: usize },

    #[error(
        "evolution time {tf} violates the branch-safe bound tf * ||H|| < pi/2; \
         keep tf below {max_tf:.6e}"
    )]
    TimeTooLarge { tf: f64, max_tf: f64 },

    #[error("Schur decomposition did not converge")]
    SchurFailed,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Config(String),
}

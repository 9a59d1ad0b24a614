use alloc::string::String;
use alloc::vec::Vec;

/// Errors produced by the core numerics.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("score outside 1..L: row {row} has score {score} with L = {levels}")]
    ScoreOutOfRange { row: usize, score: i64, levels: usize },

    #[error("unknown group label `{label}` at row {row}")]
    UnknownGroup { row: usize, label: String },

    #[error("covariate arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },

    #[error("design matrix is rank deficient (rank {rank} of {columns_total}); collinear columns: {}", .columns.join(", "))]
    RankDeficient {
        rank: usize,
        columns_total: usize,
        columns: Vec<String>,
    },

    #[error("fitting precondition failed: {0}")]
    Precondition(String),

    #[error("non-finite log likelihood at the supplied parameter point")]
    DegenerateParameters,

    #[error("information matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e}); weak directions: {}", format_directions(.directions))]
    SingularInformation {
        min_eigenvalue: f64,
        directions: Vec<(String, f64)>,
    },

    #[error("contrast covariance is singular (condition number {condition:e})")]
    SingularContrast { condition: f64 },

    #[error("covariance matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("accuracy contrasts are zero under the true model; no finite sample size exists")]
    NullEffect,

    #[error("minimum sample size exceeds the cap of {cap} items per rater")]
    SampleSizeCap { cap: u64 },
}

fn format_directions(d: &[(String, f64)]) -> String {
    let mut out = String::new();
    for (i, (name, w)) in d.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&alloc::format!("{name}={w:+.3}"));
    }
    out
}

impl Error {
    /// True for failures of the statistical procedure itself rather than of
    /// the caller's input.
    pub fn is_statistical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateParameters
                | Error::SingularInformation { .. }
                | Error::SingularContrast { .. }
                | Error::NotPsd { .. }
                | Error::NullEffect
                | Error::SampleSizeCap { .. }
        )
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

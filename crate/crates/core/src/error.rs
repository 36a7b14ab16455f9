//! Error type shared across the workspace.

/// Crate-wide error type.
///
/// `Config` carries *all* violations found in a config file, not just the
/// first; the CLI maps variants onto process exit codes (config errors → 2,
/// numerical/input errors → 3).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("config error:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error(
        "covariance matrix is not positive definite (smallest eigenvalue \
         {min_eig:.3e} <= 1e-12); an invertible covariance is required"
    )]
    NotPositiveDefinite { min_eig: f64 },

    #[error("unsupported design: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument left the admissible domain of an operation.
    #[error("domain error in {what}: {detail}")]
    Domain { what: &'static str, detail: String },

    /// Evaluation requested exactly at a singular endpoint of the potential.
    #[error("singular endpoint: {what} is not finite at r = {r}")]
    SingularEndpoint { what: &'static str, r: f64 },

    /// A stated precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Two fields on different grids were combined.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A time step failed to converge or produced an inadmissible state.
    #[error("step failure at t = {t}: {detail} (residual {residual:.3e})")]
    StepFailure {
        t: f64,
        residual: f64,
        detail: String,
    },

    /// Requested construction cannot be satisfied.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A time series is too short for the requested window analysis.
    #[error("series too short: {0}")]
    SeriesTooShort(String),

    /// An empty set was passed where at least one element is required.
    #[error("empty set: {0}")]
    EmptySet(&'static str),

    /// Malformed snapshot file.
    #[error("snapshot format: {0}")]
    SnapshotFormat(String),

    /// One or more configuration errors, each with section, key and reason.
    #[error("invalid configuration:\n{}", format_config_errors(.0))]
    Config(Vec<ConfigError>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A single configuration defect: where it is and why it is wrong.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub section: String,
    pub key: String,
    pub reason: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}: {}", self.section, self.key, self.reason)
    }
}

fn format_config_errors(errors: &[ConfigError]) -> String {
    errors
        .iter()
        .map(|e| format!("  {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration value.
    #[error("configuration error: {0}")]
    Config(String),

    /// Graph or combination matrix does not satisfy a structural requirement.
    #[error("topology error: {0}")]
    Topology(String),

    /// Likelihood model cannot be used for a belief update.
    #[error("model error: {0}")]
    Model(String),

    /// Non-finite or otherwise unusable numeric value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The behavior policy put zero mass on the action that was taken.
    #[error("action {action} is outside the support of the behavior policy")]
    OffSupport { action: usize },

    /// Inconsistent internal data, e.g. traces of different lengths.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Topology(_) => 2,
            _ => 3,
        }
    }
}

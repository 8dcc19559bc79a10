use mlsh_core::MlshError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] MlshError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 1 for anything the user can fix in their inputs, 2 for aborts at run
    /// time.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(e) => match e {
                MlshError::Config(_) | MlshError::Format(_) | MlshError::Contract(_) => 1,
                MlshError::NonFinite { .. } | MlshError::Io(_) => 2,
            },
            CliError::Io { .. } | CliError::Csv(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io_at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

use std::fmt;

use ljp_core::app::ArtifactError;
use ljp_core::corpus::CorpusError;
use ljp_core::eval::EvalError;
use ljp_core::features::FeatureError;
use ljp_core::pipeline::PipelineError;

/// Process exit status for each failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage,
    Data,
    Internal,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        match self {
            ExitKind::Usage => 1,
            ExitKind::Data => 2,
            ExitKind::Internal => 3,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(msg: impl fmt::Display) -> Self {
        CliError { kind: ExitKind::Usage, error: anyhow::anyhow!("{msg}") }
    }

    pub fn data(e: impl Into<anyhow::Error>) -> Self {
        CliError { kind: ExitKind::Data, error: e.into() }
    }

    pub fn internal(e: impl Into<anyhow::Error>) -> Self {
        CliError { kind: ExitKind::Internal, error: e.into() }
    }

    pub fn context(self, msg: impl fmt::Display + Send + Sync + 'static) -> Self {
        CliError { kind: self.kind, error: self.error.context(msg) }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Skip causes already printed by the previous link.
        let mut last = String::new();
        for (i, cause) in self.error.chain().enumerate() {
            let msg = cause.to_string();
            if i > 0 && last.contains(&msg) {
                continue;
            }
            if i > 0 {
                f.write_str(": ")?;
            }
            f.write_str(&msg)?;
            last = msg;
        }
        Ok(())
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::data(e)
            }
        }
    )*};
}

data_error!(CorpusError, EvalError, FeatureError, PipelineError, ArtifactError);

pub type CliResult<T> = Result<T, CliError>;

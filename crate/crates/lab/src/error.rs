use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] dgbo_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("output encoding failed: {0}")]
    Encode(String),
}

impl LabError {
    pub fn config(msg: impl Into<String>) -> LabError {
        LabError::Config(msg.into())
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> LabError {
        LabError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use dgbo_core::Error as E;
        match self {
            LabError::Config(_) => EXIT_CONFIG,
            LabError::Core(e) => match e {
                E::InvalidGrid(_)
                | E::InvalidParameter { .. }
                | E::UnknownProbe(_)
                | E::GridMismatch
                | E::NonFinite(_) => EXIT_CONFIG,
                E::Cfl { .. }
                | E::BlowUp { .. }
                | E::PicardDiverged { .. }
                | E::NoConvergence { .. }
                | E::DegenerateJacobian { .. } => EXIT_SOLVER,
            },
            LabError::Io { .. } | LabError::Encode(_) => EXIT_CONFIG,
        }
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;

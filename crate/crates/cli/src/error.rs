use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Bad input: config, flags, or data files that fail validation.
pub const EXIT_VALIDATION: i32 = 2;
/// The inputs were fine but the run failed (I/O, numerical breakdown).
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    /// Wraps an error raised while reading a user-supplied input file.
    pub(crate) fn input(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Validation(format!("{}: {err}", path.display()))
    }

    pub(crate) fn write(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Runtime(format!("writing {}: {err}", path.display()))
    }
}

impl From<dalloc_core::Error> for CliError {
    fn from(err: dalloc_core::Error) -> Self {
        if err.is_validation() {
            CliError::Validation(err.to_string())
        } else {
            CliError::Runtime(err.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Opens an input file, mapping a missing or unreadable file to a validation error.
pub(crate) fn open_input(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    std::fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|e| CliError::input(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(path).map_err(|e| CliError::write(path, e))?;
    Ok(path.to_path_buf())
}

use std::io::ErrorKind;
use std::path::Path;

use crosspkg::dataset::DatasetError;
use crosspkg::features::{CsvError, SchemaError};
use crosspkg::models::ModelError;
use crosspkg::scanner::ScanError;
use crosspkg::tuning::TuningError;

pub const EX_OK: i32 = 0;
pub const EX_PARTIAL: i32 = 2;
pub const EX_USAGE: i32 = 64;
pub const EX_DATAERR: i32 = 65;
pub const EX_NOINPUT: i32 = 66;
pub const EX_SOFTWARE: i32 = 70;
pub const EX_IOERR: i32 = 74;
pub const EX_CONFIG: i32 = 78;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(EX_USAGE, message)
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        let code = if e.kind() == ErrorKind::NotFound { EX_NOINPUT } else { EX_IOERR };
        Self::new(code, format!("{}: {e}", path.display()))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

fn io_code(e: &std::io::Error) -> i32 {
    if e.kind() == ErrorKind::NotFound {
        EX_NOINPUT
    } else {
        EX_IOERR
    }
}

fn model_code(e: &ModelError) -> i32 {
    match e {
        ModelError::InvalidHyperparams(_) => EX_USAGE,
        ModelError::Io { source, .. } => io_code(source),
        _ => EX_DATAERR,
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::new(model_code(&e), e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        let code = match &e {
            DatasetError::Io { source, .. } => io_code(source),
            DatasetError::InvalidRatio(_) => EX_USAGE,
            _ => EX_DATAERR,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<TuningError> for CliError {
    fn from(e: TuningError) -> Self {
        let code = match &e {
            TuningError::InvalidK(_) | TuningError::InvalidRepeats | TuningError::EmptyBudget | TuningError::InvalidSpace(_) => {
                EX_USAGE
            }
            TuningError::Model(m) => model_code(m),
            TuningError::Io(io) => io_code(io),
            _ => EX_DATAERR,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<ScanError> for CliError {
    fn from(e: ScanError) -> Self {
        let code = match &e {
            ScanError::Config(_) | ScanError::NoModels | ScanError::ModelSchemaMismatch(..) => EX_CONFIG,
            ScanError::Io { source, .. } => io_code(source),
            ScanError::Model(m) => model_code(m),
            ScanError::SinkRecord { .. } => EX_DATAERR,
            _ => EX_SOFTWARE,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<SchemaError> for CliError {
    fn from(e: SchemaError) -> Self {
        let code = match &e {
            SchemaError::Io { source, .. } => io_code(source),
            _ => EX_DATAERR,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<CsvError> for CliError {
    fn from(e: CsvError) -> Self {
        CliError::new(EX_DATAERR, e.to_string())
    }
}

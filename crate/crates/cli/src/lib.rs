//! Command implementations behind the `zoneflex` binary.

pub mod commands;
pub mod config;
pub mod plots;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;
use zoneflex::Error;

pub use commands::{cmd_disaggregate, cmd_fit, cmd_pipeline, cmd_report, cmd_simulate};
pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    /// Failure while generating synthetic data.
    #[error("simulation failed: {0}")]
    Simulation(Error),
}

impl CliError {
    /// 2 input/schema, 3 fitting/model, 4 metric preconditions, 5 simulation.
    pub fn exit_code(&self) -> u8 {
        let e = match self {
            CliError::Simulation(e) => {
                return match e {
                    Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Schema(_) | Error::Topology(_) => 2,
                    _ => 5,
                }
            }
            CliError::Core(e) => e,
        };
        match e {
            Error::UnknownPoint(_)
            | Error::Schema(_)
            | Error::Config(_)
            | Error::Topology(_)
            | Error::MissingChannel(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::SingularFit { .. }
            | Error::InsufficientData { .. }
            | Error::Fit { .. }
            | Error::MissingModel(_)
            | Error::UndefinedAllocation(_)
            | Error::UndefinedRat => 3,
            Error::UndefinedFlexibility(_)
            | Error::NoPositiveSavings
            | Error::UndefinedGini
            | Error::MetricPrecondition(_) => 4,
            Error::SimulationDiverged { .. } => 5,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Writes `path` through a temporary file in the same directory, then
/// renames it into place.
pub fn write_atomic<F>(path: &Path, body: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> zoneflex::Result<()>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))
}

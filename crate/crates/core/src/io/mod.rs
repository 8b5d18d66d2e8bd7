//! Artifact formats and the file-based pipeline stages.

pub mod commands;
pub mod formats;

pub use commands::{cmd_eval, cmd_pipeline, cmd_run, cmd_simulate, config_hash, files, Manifest, RunMode};
pub use formats::*;

use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Parse { path: PathBuf, source: ParseError },
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::Read { path: path.to_path_buf(), source })
}

/// Writes `data`, creating parent directories.
pub fn write_file(path: &Path, data: &[u8]) -> Result<(), IoError> {
    let w = |source| IoError::Write { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(w)?;
    }
    std::fs::write(path, data).map_err(w)
}

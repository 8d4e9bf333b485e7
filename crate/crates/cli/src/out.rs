//! Output directory resolution and artifact writing. Precedence: the
//! `--out` flag, then the `DENSEREW_OUT` environment variable, then
//! `./out`.

use std::path::{Path, PathBuf};

use crate::CliError;

pub fn resolve(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os("DENSEREW_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Resolves and creates the output directory.
pub fn prepare(flag: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = resolve(flag);
    std::fs::create_dir_all(&dir).map_err(|err| {
        CliError::Runtime(format!("cannot create output directory {}: {err}", dir.display()))
    })?;
    Ok(dir)
}

/// Writes one artifact and reports its path.
pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|err| {
        CliError::Runtime(format!("cannot write {}: {err}", path.display()))
    })?;
    Ok(path)
}

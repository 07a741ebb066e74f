use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::CliError;

pub fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::read(path, e))
}

/// Writes through a temporary file in the target directory so a failed run
/// never leaves a partial output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::write(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::write(path, e))?;
    tmp.persist(path).map_err(|e| CliError::write(path, e.error))?;
    Ok(())
}

pub fn append(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::write(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::write(path, e))
}

/// Regular files under `path`, sorted, or `path` itself when it is a file.
pub fn corpus_files(path: &Path) -> Result<Vec<std::path::PathBuf>, CliError> {
    let meta = fs::metadata(path).map_err(|e| CliError::read(path, e))?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(path).map_err(|e| CliError::read(path, e))? {
        let entry = entry.map_err(|e| CliError::read(path, e))?;
        if entry.file_type().map(|t| t.is_file()).unwrap_or(false) {
            files.push(entry.path());
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::read(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "corpus directory is empty"),
        ));
    }
    Ok(files)
}

pub fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

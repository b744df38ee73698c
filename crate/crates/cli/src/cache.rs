//! Disk cache of rendered output files keyed by the config hash. Access is
//! serialized through a lock file in the cache root; eviction is manual.

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::write_atomic;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

pub const CACHE_ENV: &str = "POLARON_CACHE_DIR";
const LOCK_STALE: Duration = Duration::from_secs(60);

/// Cache root: explicit config entry, then the environment variable, then
/// `.polaron-cache` under the working directory.
pub fn cache_root(cfg: &RunConfig) -> PathBuf {
    if !cfg.cache.directory.is_empty() {
        return PathBuf::from(&cfg.cache.directory);
    }
    if let Ok(dir) = std::env::var(CACHE_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from(".polaron-cache")
}

/// Held lock file; removed on drop. Stale locks older than a minute are
/// broken, so a crashed run cannot wedge the cache forever.
pub struct CacheLock {
    path: PathBuf,
}

impl Drop for CacheLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub fn lock(root: &Path) -> Result<CacheLock> {
    fs::create_dir_all(root).map_err(|e| CliError::Io(root.display().to_string(), e))?;
    let path = root.join(".lock");
    let deadline = std::time::Instant::now() + Duration::from_secs(120);
    loop {
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => return Ok(CacheLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                let stale = fs::metadata(&path)
                    .and_then(|m| m.modified())
                    .ok()
                    .and_then(|t| t.elapsed().ok())
                    .map(|age| age > LOCK_STALE)
                    .unwrap_or(true);
                if stale {
                    let _ = fs::remove_file(&path);
                    continue;
                }
                if std::time::Instant::now() > deadline {
                    return Err(CliError::Io(
                        path.display().to_string(),
                        std::io::Error::new(std::io::ErrorKind::TimedOut, "cache lock timeout"),
                    ));
                }
                std::thread::sleep(Duration::from_millis(10));
            }
            Err(e) => return Err(CliError::Io(path.display().to_string(), e)),
        }
    }
}

/// Fetches the cached bytes for `name` if present.
pub fn get(root: &Path, name: &str) -> Result<Option<Vec<u8>>> {
    let _guard = lock(root)?;
    let path = root.join(name);
    match fs::read(&path) {
        Ok(bytes) => Ok(Some(bytes)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(CliError::Io(path.display().to_string(), e)),
    }
}

/// Stores rendered output bytes under `name`.
pub fn put(root: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let _guard = lock(root)?;
    write_atomic(&root.join(name), bytes)
}

/// Removes every cached entry (not the lock of a concurrent holder).
pub fn clear(root: &Path) -> Result<usize> {
    if !root.exists() {
        return Ok(0);
    }
    let _guard = lock(root)?;
    let mut removed = 0;
    let entries = fs::read_dir(root).map_err(|e| CliError::Io(root.display().to_string(), e))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::Io(root.display().to_string(), e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == ".lock" {
            continue;
        }
        fs::remove_file(entry.path())
            .map_err(|e| CliError::Io(entry.path().display().to_string(), e))?;
        removed += 1;
    }
    Ok(removed)
}

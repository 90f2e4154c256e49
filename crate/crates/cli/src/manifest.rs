//! Run manifest and atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use pnpgl::{Error, Result};

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

/// Record of one run, written as `key=value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    /// `flags` or `config:<path>`.
    pub source: String,
    pub seed: u64,
    /// Fully resolved settings, in key order.
    pub config: Vec<(String, String)>,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "command={}\nsource={}\nseed={}\n",
            self.command, self.source, self.seed
        );
        for (k, v) in &self.config {
            out.push_str(&format!("config.{k}={v}\n"));
        }
        out.push_str(&format!("version.pnpgl={}\n", env!("CARGO_PKG_VERSION")));
        for (i, p) in self.outputs.iter().enumerate() {
            out.push_str(&format!("output.{i}={}\n", p.display()));
        }
        out.push_str(&format!("wall_clock_seconds={:.6}\n", self.wall_clock_s));
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_text().as_bytes())
    }
}

//! File emission: CSV columns print floats with 17 significant digits so
//! identical runs produce identical bytes; JSON goes through serde_json's
//! shortest-round-trip formatting, which is also deterministic and lossless.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Collects the files a scenario intends to write, validates that the set is
/// collision-free, and performs the writes only when the run has finished.
#[derive(Default)]
pub struct OutputSet {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl OutputSet {
    pub fn add(&mut self, path: PathBuf, bytes: Vec<u8>) -> Result<(), CliError> {
        if self.files.iter().any(|(p, _)| *p == path) {
            return Err(CliError::Config(format!(
                "output path {} is claimed twice",
                path.display()
            )));
        }
        self.files.push((path, bytes));
        Ok(())
    }

    pub fn add_csv(
        &mut self,
        path: PathBuf,
        header: &str,
        rows: impl Iterator<Item = Vec<String>>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        writeln!(buf, "{header}").expect("write to vec");
        for row in rows {
            writeln!(buf, "{}", row.join(",")).expect("write to vec");
        }
        self.add(path, buf)
    }

    pub fn add_json(&mut self, path: PathBuf, value: &serde_json::Value) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::Runtime(format!("serialization: {e}")))?;
        bytes.push(b'\n');
        self.add(path, bytes)
    }

    /// Write everything. Nothing touches the filesystem before this point,
    /// so failed runs leave no partial outputs.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (path, bytes) in self.files {
            let full = dir.join(&path);
            if let Some(parent) = full.parent() {
                fs::create_dir_all(parent).map_err(|e| {
                    CliError::Runtime(format!("cannot create {}: {e}", parent.display()))
                })?;
            }
            fs::write(&full, bytes)
                .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", full.display())))?;
            written.push(full);
        }
        Ok(written)
    }
}

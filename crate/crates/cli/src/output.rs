//! Deterministic data files plus a provenance sidecar.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{CliError, RunConfig};

/// Output directory of one run.
pub struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(dir: impl AsRef<Path>) -> Result<Self, CliError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir, written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// CSV with `header` and one record per row.
    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(self.path(name))?));
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush()?;
        self.written.push(name.into());
        Ok(())
    }

    /// Pretty JSON; key order follows field declaration order.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut f = BufWriter::new(File::create(self.path(name))?);
        serde_json::to_writer_pretty(&mut f, value).map_err(|e| CliError::Failed(format!("cannot encode {name}: {e}")))?;
        f.write_all(b"\n")?;
        f.flush()?;
        self.written.push(name.into());
        Ok(())
    }

    /// The resolved config and `provenance.json`; the latter is the only file
    /// that changes between identical runs.
    pub fn finish(mut self, command: &str, cfg: &RunConfig) -> Result<(), CliError> {
        let text = cfg.to_json();
        std::fs::write(self.path("config.json"), format!("{text}\n"))?;
        self.written.push("config.json".into());
        let hash: String = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        let unix_time = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let prov = Provenance {
            tool: "frachs",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: hash,
            unix_time,
            threads: rayon::current_num_threads(),
            files: std::mem::take(&mut self.written),
        };
        let mut f = BufWriter::new(File::create(self.path("provenance.json"))?);
        serde_json::to_writer_pretty(&mut f, &prov).map_err(|e| CliError::Failed(e.to_string()))?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    config_sha256: String,
    unix_time: u64,
    threads: usize,
    files: Vec<String>,
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

/// Shortest round-trip decimal; `NaN` for missing values.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use levybridge::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const MANIFEST_SUFFIX: &str = ".manifest.json";

/// Everything needed to rerun a command and check its outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Command line after the program name, output directory flags removed.
    pub args: Vec<String>,
    pub config: Value,
    /// Derived quantities, such as lengths given in units of `L_b`.
    pub resolved: Value,
    pub seed: Option<u64>,
    /// Output files relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub status: String,
    pub wall_time_s: f64,
}

/// Collects the files written by one command and writes its manifest.
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<String>,
    started: Instant,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputSet {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Registers `name` as an output and returns its full path.
    pub fn register(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.path(name)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.register(name);
        fs::write(p, bytes)?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes a CSV built by `fill`.
    pub fn write_csv<F>(&mut self, name: &str, header: &[&str], fill: F) -> Result<()>
    where
        F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<()>,
    {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header)?;
            fill(&mut w)?;
            w.flush()?;
        }
        self.write_bytes(name, &buf)
    }

    pub fn finish(self, manifest_name: &str, mut meta: Manifest, status: &str) -> Result<PathBuf> {
        meta.outputs = self.files;
        meta.status = status.to_string();
        meta.wall_time_s = self.started.elapsed().as_secs_f64();
        let p = self.dir.join(manifest_name);
        let mut f = fs::File::create(&p)?;
        serde_json::to_writer_pretty(&mut f, &meta)?;
        f.write_all(b"\n")?;
        Ok(p)
    }
}

impl Manifest {
    pub fn new(command: &str, args: Vec<String>, config: Value, resolved: Value, seed: Option<u64>) -> Self {
        Manifest {
            tool: "levybridge".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args,
            config,
            resolved,
            seed,
            outputs: Vec::new(),
            status: String::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Formats a float for CSV cells; shortest round-trip form.
pub fn num(x: f64) -> String {
    x.to_string()
}

/// A failed command: message plus process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Failure::new(Error::Domain(String::new()).exit_code(), message)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(e.exit_code(), e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Error::from(e).into()
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

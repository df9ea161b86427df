use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use symred::Error;

/// Process exit codes.
pub mod exit {
    pub const USAGE: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const VERIFICATION: i32 = 4;
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: exit::USAGE, kind: "usage", message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { code: exit::NUMERICAL, kind: "numerical", message: message.into() }
    }

    pub fn verification(message: impl Into<String>) -> Self {
        Self { code: exit::VERIFICATION, kind: "verification", message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind, "exit_code": self.code, "message": self.message }).to_string()
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(_) | Error::Degenerate(_) | Error::NotStabilized(_) | Error::Growth(_) => {
                Failure::numerical(e.to_string())
            }
            _ => Failure::usage(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::usage(format!("malformed JSON: {e}"))
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepStatus {
    pub step: String,
    pub status: String,
}

/// Record of one CLI invocation, written next to its outputs.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub versions: Versions,
    pub started_unix: u64,
    pub wall_time_s: f64,
    pub workers: usize,
    pub steps: Vec<StepStatus>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Versions {
    pub cli: String,
    pub core: String,
}

/// Collects output files and step statuses for the manifest.
pub struct Run {
    command: String,
    out_dir: PathBuf,
    config_digest: String,
    started: Instant,
    started_unix: u64,
    workers: usize,
    steps: Vec<StepStatus>,
    outputs: Vec<String>,
}

impl Run {
    pub fn new(command: &str, out_dir: &Path, config: &impl Serialize) -> CliResult<Self> {
        fs::create_dir_all(out_dir)
            .map_err(|e| Failure::usage(format!("cannot create output directory {}: {e}", out_dir.display())))?;
        let canonical = serde_json::to_string(config)?;
        Ok(Self {
            command: command.to_string(),
            out_dir: out_dir.to_path_buf(),
            config_digest: sha256_hex(canonical.as_bytes()),
            started: Instant::now(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            workers: 1,
            steps: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn set_workers(&mut self, workers: usize) {
        self.workers = workers;
    }

    pub fn step(&mut self, step: impl Into<String>, status: impl Into<String>) {
        self.steps.push(StepStatus { step: step.into(), status: status.into() });
    }

    /// `explicit` if given, otherwise `default_name` inside the output directory.
    pub fn path(&self, explicit: Option<&Path>, default_name: &str) -> PathBuf {
        explicit.map(Path::to_path_buf).unwrap_or_else(|| self.out_dir.join(default_name))
    }

    pub fn write_text(&mut self, path: &Path, text: &str) -> CliResult<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Failure::usage(format!("cannot create {}: {e}", parent.display())))?;
        }
        fs::write(path, text).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    pub fn write_json(&mut self, path: &Path, value: &impl Serialize) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(path, &text)
    }

    /// Writes `<command>.manifest.json` into the output directory.
    pub fn finish(mut self) -> CliResult<PathBuf> {
        let path = self.out_dir.join(format!("{}.manifest.json", self.command));
        self.outputs.push(path.display().to_string());
        let manifest = RunManifest {
            command: self.command.clone(),
            config_digest: self.config_digest.clone(),
            versions: Versions { cli: env!("CARGO_PKG_VERSION").into(), core: symred::VERSION.into() },
            started_unix: self.started_unix,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            workers: self.workers,
            steps: self.steps,
            outputs: self.outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

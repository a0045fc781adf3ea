//! Output-directory bookkeeping: an exclusive lock for the duration of a run
//! and a JSON manifest listing the effective configuration, the arguments and
//! the SHA-256 of every file read or written.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const LOCK_FILE: &str = ".polar.lock";

/// Held while a run writes into an output directory; removed on drop.
#[derive(Debug)]
struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        let mut file = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                anyhow!(
                    "output directory {} is in use by another run (delete {} if no run is active)",
                    dir.display(),
                    path.display()
                )
            } else {
                anyhow!("cannot create lock file {}: {e}", path.display())
            }
        })?;
        writeln!(file, "{}", std::process::id())?;
        Ok(OutputLock { path })
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    tool_version: &'static str,
    library_version: &'static str,
    command: &'a str,
    arguments: &'a BTreeMap<String, serde_json::Value>,
    config: &'a RunConfig,
    inputs: &'a [FileDigest],
    outputs: &'a [FileDigest],
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn digest(role: &str, path: String, bytes: &[u8]) -> FileDigest {
    FileDigest {
        role: role.to_string(),
        path,
        bytes: bytes.len() as u64,
        sha256: sha256_hex(bytes),
    }
}

/// One subcommand invocation writing into one output directory.
pub struct Run {
    command: &'static str,
    dir: PathBuf,
    arguments: BTreeMap<String, serde_json::Value>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    _lock: OutputLock,
}

impl Run {
    pub fn start(command: &'static str, dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Run {
            command,
            dir: dir.to_path_buf(),
            arguments: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            _lock: OutputLock::acquire(dir)?,
        })
    }

    /// Records a command argument so the manifest can reproduce the call.
    pub fn arg(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("argument values serialize");
        self.arguments.insert(key.to_string(), value);
    }

    /// Reads an input file and records its digest.
    pub fn read(&mut self, role: &str, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("reading {role} file {}", path.display()))?;
        self.inputs.push(digest(role, path.display().to_string(), &bytes));
        Ok(bytes)
    }

    /// Writes `bytes` to `<out>/<name>` and records its digest.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(digest("output", name.to_string(), bytes));
        Ok(())
    }

    pub fn manifest_name(command: &str) -> String {
        format!("{command}.manifest.json")
    }

    /// Writes the manifest and releases the lock.
    pub fn finish(self, config: &RunConfig) -> Result<()> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            tool_version: env!("CARGO_PKG_VERSION"),
            library_version: polar_core::VERSION,
            command: self.command,
            arguments: &self.arguments,
            config,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.dir.join(Self::manifest_name(self.command));
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

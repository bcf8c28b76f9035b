//! Output files: every file opens with a provenance comment, and run
//! timestamps go to a `run.log` sidecar so the data files stay reproducible.

use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::CliError;

pub struct Output {
    dir: PathBuf,
    command: &'static str,
    config_hash: String,
    seed: u64,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path, command: &'static str, config_hash: &str, seed: u64) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            config_hash: config_hash.to_string(),
            seed,
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn header(&self) -> String {
        format!(
            "# sqz {} config_sha256={} seed={}\n",
            self.command, self.config_hash, self.seed
        )
    }

    /// Create `name` with the provenance header already written.
    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path)?);
        w.write_all(self.header().as_bytes())?;
        self.written.push(path);
        Ok(w)
    }

    pub fn write_text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        w.write_all(body.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    /// Append one line per run to `run.log` with wall-clock time and outcome.
    pub fn log_run(&self, outcome: &str) -> Result<(), CliError> {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut line = format!(
            "unix_time={secs} command={} config_sha256={} seed={} outcome={outcome}",
            self.command, self.config_hash, self.seed
        );
        for p in &self.written {
            let _ = write!(line, " wrote={}", p.file_name().and_then(|n| n.to_str()).unwrap_or("?"));
        }
        let mut f = OpenOptions::new().create(true).append(true).open(self.path("run.log"))?;
        writeln!(f, "{line}")?;
        Ok(())
    }
}

//! Output directory with content digests, fixed-precision CSV and the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{RunError, RunResult};

/// 17 significant digits: enough to round-trip every f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Column-oriented CSV builder.
pub struct Csv {
    header: Vec<String>,
    body: String,
}

impl Csv {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), body: String::new() }
    }

    pub fn row(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.header.len());
        let line: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
        self.body.push_str(&line.join(","));
        self.body.push('\n');
    }

    /// Row with leading integer columns (indices, flags).
    pub fn row_mixed(&mut self, ints: &[i64], values: &[f64]) {
        debug_assert_eq!(ints.len() + values.len(), self.header.len());
        let mut line: Vec<String> = ints.iter().map(|v| v.to_string()).collect();
        line.extend(values.iter().map(|v| fmt_f64(*v)));
        self.body.push_str(&line.join(","));
        self.body.push('\n');
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        s.push_str(&self.body);
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FileDigest {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageTiming {
    pub name: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub cli_version: &'static str,
    pub core_version: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub stages: Vec<StageTiming>,
    pub files: Vec<FileDigest>,
    pub exit_code: i32,
}

/// Collects emitted files and stage timings for the manifest.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileDigest>,
    stages: Vec<StageTiming>,
    started: Instant,
    started_unix: u64,
    stage_start: Instant,
}

impl OutputDir {
    pub fn create(root: &Path) -> RunResult<Self> {
        std::fs::create_dir_all(root).map_err(|source| RunError::Io { path: root.display().to_string(), source })?;
        let now = Instant::now();
        let started_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(Self { root: root.to_path_buf(), files: Vec::new(), stages: Vec::new(), started: now, started_unix, stage_start: now })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Close the current stage under `name`.
    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push(StageTiming { name: name.to_string(), seconds: (now - self.stage_start).as_secs_f64() });
        self.stage_start = now;
    }

    pub fn write(&mut self, name: &str, contents: &str) -> RunResult<PathBuf> {
        let path = self.root.join(name);
        std::fs::write(&path, contents).map_err(|source| RunError::Io { path: path.display().to_string(), source })?;
        let digest = Sha256::digest(contents.as_bytes());
        self.files.retain(|f| f.name != name);
        self.files.push(FileDigest { name: name.to_string(), bytes: contents.len(), sha256: hex::encode(digest) });
        Ok(path)
    }

    pub fn write_csv(&mut self, name: &str, csv: &Csv) -> RunResult<PathBuf> {
        self.write(name, &csv.render())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> RunResult<PathBuf> {
        // non-finite numbers serialize as null
        let text = serde_json::to_string_pretty(value).map_err(|e| RunError::Usage(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }

    pub fn finish(mut self, command: &str, config: &RunConfig, exit_code: i32) -> RunResult<RunManifest> {
        let manifest = RunManifest {
            tool: "mflq",
            cli_version: env!("CARGO_PKG_VERSION"),
            core_version: mflq::VERSION,
            command: command.to_string(),
            config: config.clone(),
            started_unix_seconds: self.started_unix,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            stages: std::mem::take(&mut self.stages),
            files: self.files.clone(),
            exit_code,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Usage(e.to_string()))?;
        let path = self.root.join("manifest.json");
        std::fs::write(&path, text + "\n").map_err(|source| RunError::Io { path: path.display().to_string(), source })?;
        Ok(manifest)
    }
}

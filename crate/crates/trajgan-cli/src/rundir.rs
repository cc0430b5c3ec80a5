//! Run directory plumbing. Every run directory records the resolved
//! configuration, the seed, the binary version and a log; the files
//! carry no timestamps, hostnames or absolute paths, so rerunning a
//! seeded command writes byte-identical output.

use std::fs;
use std::path::{Path, PathBuf};

use trajgan::{Error, Result, VERSION};

pub struct RunDir {
    root: PathBuf,
    lines: Vec<String>,
}

impl RunDir {
    /// Create `root` (if needed) and record `config.json` + `meta.json`.
    /// `config_json` is the command's fully resolved configuration.
    pub fn create(root: &Path, command: &str, seed: u64, config_json: &str) -> Result<RunDir> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let rd = RunDir { root: root.to_path_buf(), lines: Vec::new() };
        rd.write("config.json", config_json)?;
        let meta = serde_json::json!({ "command": command, "seed": seed, "version": VERSION });
        rd.write("meta.json", format!("{meta:#}\n"))?;
        Ok(rd)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&self, rel: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<()> {
        let p = self.root.join(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&p, contents.as_ref()).map_err(|e| Error::io(&p, e))
    }

    /// Print a line and keep it for `run.log`.
    pub fn log(&mut self, line: impl Into<String>) {
        let line = line.into();
        println!("{line}");
        self.lines.push(line);
    }

    /// Persist the accumulated log as `run.log`.
    pub fn finish(self) -> Result<()> {
        let mut text = self.lines.join("\n");
        text.push('\n');
        self.write("run.log", text)
    }
}

/// Default run directory for a training command: `<stem>.run` next to
/// the output checkpoint.
pub fn default_run_dir(out: &Path) -> PathBuf {
    out.with_extension("run")
}

use crate::config::RunConfig;
use serde::Serialize;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub struct OutDir {
    pub root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn sub(&self, name: &str) -> io::Result<OutDir> {
        OutDir::create(&self.root.join(name))
    }

    fn path(&mut self, name: &str) -> PathBuf {
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        self.root.join(name)
    }

    /// Write through a temporary file so readers never see a partial file.
    fn atomic(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        let path = self.path(name);
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(tmp, path)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        self.atomic(name, text.as_bytes())
    }

    pub fn csv<R: AsRef<[String]>>(&mut self, name: &str, header: &[&str], rows: &[R]) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(io::Error::other)?;
        for r in rows {
            w.write_record(r.as_ref()).map_err(io::Error::other)?;
        }
        let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
        self.atomic(name, &bytes)
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }
}

/// Float formatting shared by every CSV: shortest round-trip representation.
pub fn f(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Serialize)]
pub struct Manifest<'a, S: Serialize> {
    pub command: &'a str,
    pub status: &'a str,
    pub exit_code: i32,
    pub seed: u64,
    pub workers: usize,
    pub config: &'a RunConfig,
    pub artifacts: &'a [String],
    pub summary: S,
}

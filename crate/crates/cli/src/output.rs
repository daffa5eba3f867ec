//! Artifact writing: versioned CSVs, summary JSON and the run manifest.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    pub fn create(dir: PathBuf) -> io::Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, written: Vec::new() })
    }

    /// Write `rows` under `header`; every line is prefixed with the schema version.
    pub fn csv<I>(&mut self, name: &str, header: &str, rows: I) -> io::Result<()>
    where
        I: IntoIterator<Item = String>,
    {
        let mut w = BufWriter::new(fs::File::create(self.dir.join(name))?);
        writeln!(w, "schema_version,{header}")?;
        for row in rows {
            writeln!(w, "{SCHEMA_VERSION},{row}")?;
        }
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.dir.join(name), text)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn entries(&self) -> io::Result<Vec<FileEntry>> {
        self.written
            .iter()
            .map(|name| {
                let bytes = fs::read(self.dir.join(name))?;
                Ok(FileEntry { path: name.clone(), sha256: hex::encode(Sha256::digest(&bytes)), bytes: bytes.len() as u64 })
            })
            .collect()
    }

    pub fn write_manifest<T: Serialize>(&self, manifest: &T) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(manifest)?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)
    }
}

pub fn unix_millis() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

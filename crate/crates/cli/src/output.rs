//! Artifact writing: each file is written to a temporary sibling and renamed
//! into place, so readers never see a partial file.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ExperimentConfig, Format};

/// Writes `contents` to `path` atomically, creating parent directories.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// The JSON document of a command: its name, the resolved config and the result.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
    pub result: &'a T,
}

/// Writes `<dir>/<command>.json` and/or `<dir>/<command>.csv` per the
/// configured format and returns the paths written.
pub fn emit<T: Serialize>(command: &str, config: &ExperimentConfig, result: &T, csv: &str) -> std::io::Result<Vec<PathBuf>> {
    let dir = &config.output.dir;
    let mut written = Vec::new();
    if matches!(config.output.format, Format::Json | Format::Both) {
        let path = dir.join(format!("{command}.json"));
        let doc = Envelope { command, config, result };
        let mut text = serde_json::to_string_pretty(&doc).map_err(std::io::Error::other)?;
        text.push('\n');
        write_atomic(&path, &text)?;
        written.push(path);
    }
    if matches!(config.output.format, Format::Csv | Format::Both) {
        let path = dir.join(format!("{command}.csv"));
        write_atomic(&path, csv)?;
        written.push(path);
    }
    Ok(written)
}

/// Concatenates CSV tables that share a header, keeping the header once.
pub fn join_csv<'a>(tables: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for (i, t) in tables.into_iter().enumerate() {
        let mut lines = t.lines();
        let header = lines.next().unwrap_or("");
        if i == 0 {
            out.push_str(header);
            out.push('\n');
        }
        for l in lines {
            out.push_str(l);
            out.push('\n');
        }
    }
    out
}

//! JSON Lines I/O with an optional leading metadata line.
//!
//! Artifacts written by the command-line tool start with one meta record
//! `{"format_version": ..., "config": ...}` that echoes the fully resolved
//! run configuration; readers here skip it transparently.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const JSONL_FORMAT_VERSION: &str = "ablategen.jsonl.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonlMeta {
    pub format_version: String,
    pub config: serde_json::Value,
}

impl JsonlMeta {
    pub fn new(config: impl Serialize) -> Result<Self> {
        Ok(JsonlMeta {
            format_version: JSONL_FORMAT_VERSION.to_string(),
            config: serde_json::to_value(config)?,
        })
    }
}

/// Write records one per line, preceded by the meta line when given.
pub fn write_jsonl<T: Serialize>(
    path: &Path,
    meta: Option<&JsonlMeta>,
    items: &[T],
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    if let Some(meta) = meta {
        serde_json::to_writer(&mut out, meta)?;
        out.write_all(b"\n")?;
    }
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Read records, returning the leading meta line separately when present.
pub fn read_jsonl_with_meta<T: DeserializeOwned>(
    path: &Path,
) -> Result<(Option<JsonlMeta>, Vec<T>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut meta = None;
    let mut items = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if lineno == 0 {
            if let Ok(value) = serde_json::from_str::<serde_json::Value>(&line) {
                if value.get("format_version").is_some() {
                    meta = serde_json::from_value(value).ok();
                    continue;
                }
            }
        }
        let item: T = serde_json::from_str(&line).map_err(|e| {
            Error::BadFormat(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        items.push(item);
    }
    Ok((meta, items))
}

/// Read records, ignoring any leading meta line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl_with_meta(path).map(|(_, items)| items)
}

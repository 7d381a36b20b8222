//! Artifact writing. Every artifact carries the resolved invocation so a run
//! can be audited and repeated from the file alone.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use morphkit::formats;

pub const TOOL: &str = concat!("morphkit ", env!("CARGO_PKG_VERSION"));

/// Resolved configuration of one command invocation.
#[derive(Debug, Clone)]
pub struct Provenance {
    value: Value,
}

impl Provenance {
    pub fn new(command: &str, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            value: json!({
                "tool": TOOL,
                "command": command,
                "config": serde_json::to_value(config)?,
            }),
        })
    }

    pub fn value(&self) -> &Value {
        &self.value
    }

    /// Single-line form for `#` comment headers.
    pub fn line(&self) -> String {
        self.value.to_string()
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T], prov: &Provenance) -> Result<()> {
    let file = formats::create_file(path)?;
    formats::write_csv_with_header(file, header, rows, Some(&prov.line()))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Pretty JSON object with a leading `provenance` member.
pub fn write_json(path: &Path, body: &impl Serialize, prov: &Provenance) -> Result<()> {
    let mut doc = serde_json::Map::new();
    doc.insert("provenance".into(), prov.value().clone());
    match serde_json::to_value(body)? {
        Value::Object(fields) => doc.extend(fields),
        other => {
            doc.insert("result".into(), other);
        }
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// JSON-lines file preceded by a `#` provenance line.
pub fn write_jsonl(
    path: &Path,
    prov: &Provenance,
    body: impl FnOnce(&mut dyn Write) -> morphkit::Result<()>,
) -> Result<()> {
    let mut file = formats::create_file(path)?;
    writeln!(file, "# {}", prov.line())?;
    body(&mut file).with_context(|| format!("writing {}", path.display()))?;
    file.flush()?;
    Ok(())
}

pub fn artifact(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

pub fn announce(paths: &[&Path]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

//! Provenance headers and artifact writing. JSON artifacts embed the
//! provenance; CSV artifacts keep their frozen column contracts, so for
//! them the header goes to stderr only. Nothing time-dependent is written
//! to disk: identical inputs give byte-identical files.

use crate::config::Echo;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Provenance {
    pub schema: u32,
    pub version: &'static str,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: BTreeMap<String, String>,
}

pub fn provenance(command: &'static str, seed: Option<u64>, echo: Echo) -> Provenance {
    let p = Provenance {
        schema: SCHEMA,
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        config: echo.0,
    };
    let mut line = format!("run: command={} version={} schema={}", p.command, p.version, p.schema);
    if let Some(s) = p.seed {
        line.push_str(&format!(" seed={s}"));
    }
    for (k, v) in &p.config {
        line.push_str(&format!(" {k}={v}"));
    }
    eprintln!("{line}");
    p
}

/// Pretty JSON with a trailing newline, to a file or stdout.
pub fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn write_text(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

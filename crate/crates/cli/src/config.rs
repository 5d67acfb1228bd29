//! Shared key=value configuration: one grammar for config files and flags,
//! with flags winning on conflict. The effective configuration is echoed
//! into every provenance header, sorted, so identical runs produce
//! identical artifacts.

use anyhow::{bail, Context};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    entries: BTreeMap<String, String>,
}

impl FileConfig {
    /// Load `key=value` lines; blank lines and `#` comments are skipped.
    pub fn load(path: Option<&Path>) -> anyhow::Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config {} line {}: expected key=value", path.display(), i + 1);
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Flag value if present, else the config entry parsed, else None.
    pub fn merge<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> anyhow::Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.get(key) {
            Some(raw) => match raw.parse() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("config key `{key}`: bad value `{raw}`: {e}"),
            },
            None => Ok(None),
        }
    }

    /// Like merge, but the key must resolve somewhere.
    pub fn require<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> anyhow::Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.merge(flag, key)?
            .ok_or_else(|| anyhow::anyhow!("`{key}` is required (flag or config file)"))
    }
}

/// The effective configuration a command actually ran with, echoed into
/// provenance. BTreeMap keeps the echo deterministic.
#[derive(Debug, Default)]
pub struct Echo(pub BTreeMap<String, String>);

impl Echo {
    pub fn put(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn put_opt(&mut self, key: &str, value: Option<impl ToString>) {
        if let Some(v) = value {
            self.put(key, v);
        }
    }
}

//! Hash-stamped artifacts and the run manifest.

use crate::config::RunConfig;
use crate::error::CliError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "run_manifest.json";

/// Everything a command needs besides its own arguments.
#[derive(Debug)]
pub struct Context {
    pub cfg: RunConfig,
    pub hash: String,
    pub out: PathBuf,
    pub strict: bool,
    pub cache_dir: Option<PathBuf>,
    artifacts: Vec<String>,
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Deserialize)]
struct HashOnly {
    config_hash: Option<String>,
}

impl Context {
    pub fn new(cfg: RunConfig, out: PathBuf, strict: bool, cache_dir: Option<PathBuf>) -> Self {
        let hash = cfg.hash();
        Context { cfg, hash, out, strict, cache_dir, artifacts: Vec::new() }
    }

    pub fn artifacts(&self) -> &[String] {
        &self.artifacts
    }

    pub fn meta(&self) -> Vec<(String, String)> {
        vec![("config_hash".to_string(), self.hash.clone())]
    }

    /// Absolute path of an output, creating parent directories and recording it.
    pub fn path(&mut self, rel: &str) -> Result<PathBuf, CliError> {
        let p = self.out.join(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        if !self.artifacts.iter().any(|a| a == rel) {
            self.artifacts.push(rel.to_string());
        }
        Ok(p)
    }

    pub fn record(&mut self, rel: &str) {
        if !self.artifacts.iter().any(|a| a == rel) {
            self.artifacts.push(rel.to_string());
        }
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, body: &T) -> Result<(), CliError> {
        let p = self.path(rel)?;
        let text = serde_json::to_string_pretty(&Stamped { config_hash: &self.hash, body })?;
        std::fs::write(p, text + "\n")?;
        Ok(())
    }

    /// Writes through `f` into a buffered file.
    pub fn write_with(&mut self, rel: &str, f: impl FnOnce(&mut BufWriter<std::fs::File>) -> Result<(), CliError>) -> Result<(), CliError> {
        let p = self.path(rel)?;
        let mut w = BufWriter::new(std::fs::File::create(p)?);
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Reads an upstream JSON artifact, refusing one stamped with another config.
    pub fn read_json<T: DeserializeOwned>(&self, rel: &str, producer: &str) -> Result<T, CliError> {
        let p = self.out.join(rel);
        let text = std::fs::read_to_string(&p)
            .map_err(|_| CliError::Prerequisite(format!("{} not found; run `gsqg {producer}` first with the same config", p.display())))?;
        self.check_hash(&text, &p)?;
        serde_json::from_str(&text).map_err(|e| CliError::Prerequisite(format!("{} is malformed: {e}", p.display())))
    }

    pub fn check_hash(&self, json_text: &str, path: &Path) -> Result<(), CliError> {
        let h: HashOnly = serde_json::from_str(json_text).map_err(|e| CliError::Prerequisite(format!("{} is malformed: {e}", path.display())))?;
        match h.config_hash {
            Some(h) if h == self.hash => Ok(()),
            Some(h) => Err(CliError::Prerequisite(format!(
                "{} was produced with config hash {h}, current config hash is {}",
                path.display(),
                self.hash
            ))),
            None => Err(CliError::Prerequisite(format!("{} carries no config hash", path.display()))),
        }
    }

    pub fn require(&self, rel: &str, producer: &str) -> Result<PathBuf, CliError> {
        let p = self.out.join(rel);
        if p.exists() {
            Ok(p)
        } else {
            Err(CliError::Prerequisite(format!("{} not found; run `gsqg {producer}` first", p.display())))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub status: String,
    pub exit_code: i32,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub versions: BTreeMap<String, String>,
    pub config: RunConfig,
    pub commands: BTreeMap<String, CommandRecord>,
}

/// Adds or replaces the entry for `command`; a manifest from another config is started afresh.
pub fn update_manifest(ctx: &Context, command: &str, outcome: &Result<(), CliError>) -> Result<(), CliError> {
    std::fs::create_dir_all(&ctx.out)?;
    let path = ctx.out.join(MANIFEST);
    let previous: Option<RunManifest> = std::fs::read_to_string(&path).ok().and_then(|t| serde_json::from_str(&t).ok());
    let mut manifest = match previous {
        Some(m) if m.config_hash == ctx.hash => m,
        _ => RunManifest {
            config_hash: ctx.hash.clone(),
            versions: BTreeMap::from([
                ("gsqg-core".to_string(), gsqg_core::VERSION.to_string()),
                ("gsqg-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ]),
            config: ctx.cfg.clone(),
            commands: BTreeMap::new(),
        },
    };
    let (status, exit_code) = match outcome {
        Ok(()) => ("ok".to_string(), 0),
        Err(e) => (e.kind().to_string(), e.exit_code()),
    };
    manifest.commands.insert(command.to_string(), CommandRecord { status, exit_code, artifacts: ctx.artifacts().to_vec() });
    std::fs::write(path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

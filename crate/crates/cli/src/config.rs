//! Optional TOML configuration shared by every subcommand. Command-line
//! flags take precedence over it.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Device profile used by `synth` and for keypad layouts in reports.
    pub profile: String,
    pub paths: Paths,
    pub server: Server,
    pub seeds: Seeds,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: PathBuf,
    pub matrix: PathBuf,
    pub model: PathBuf,
    pub report: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Server {
    pub host: String,
    pub port: u16,
    pub raw_log_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub synth: u64,
    pub folds: u64,
    pub init: u64,
    pub split: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            profile: "iphone5".into(),
            paths: Paths::default(),
            server: Server::default(),
            seeds: Seeds::default(),
        }
    }
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            dataset: "dataset.ndjson".into(),
            matrix: "matrix.ndjson".into(),
            model: "model.json".into(),
            report: "report.ndjson".into(),
        }
    }
}

impl Default for Server {
    fn default() -> Self {
        Server {
            host: "127.0.0.1".into(),
            port: 7070,
            raw_log_dir: None,
        }
    }
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            synth: 1,
            folds: 1,
            init: 1,
            split: 1,
        }
    }
}

impl Config {
    /// Reads `path`, or returns the defaults when there is none.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("config {}", path.display()))?;
        let cfg: Config = toml::from_str(&text).with_context(|| format!("config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.server.port == 0 {
            bail!("server port must be in 1-65535");
        }
        Ok(())
    }
}

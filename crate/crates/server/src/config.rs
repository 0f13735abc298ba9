use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use miboard_core::config::ConfigError;
use miboard_core::GameConfig;
use thiserror::Error;

use crate::room::Timers;

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub listen: SocketAddr,
    pub corpus: PathBuf,
    pub log: PathBuf,
    /// Fixed base seed; when absent a random one is drawn at boot.
    pub seed: Option<u64>,
    pub game: GameConfig,
    pub timers: Timers,
    /// How often rooms check their timers.
    pub tick: Duration,
}

impl ServerConfig {
    pub fn new(listen: SocketAddr, corpus: impl Into<PathBuf>, log: impl Into<PathBuf>) -> Self {
        ServerConfig {
            listen,
            corpus: corpus.into(),
            log: log.into(),
            seed: None,
            game: GameConfig::default(),
            timers: Timers::default(),
            tick: Duration::from_millis(250),
        }
    }
}

#[derive(Debug, Error)]
pub enum GameConfigFileError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: ConfigError },
}

/// Reads a JSON object of game-rule overrides; absent keys keep defaults.
pub fn load_game_config(path: &Path) -> Result<GameConfig, GameConfigFileError> {
    let raw = fs::read_to_string(path).map_err(|source| GameConfigFileError::Io { path: path.into(), source })?;
    let config: GameConfig =
        serde_json::from_str(&raw).map_err(|source| GameConfigFileError::Parse { path: path.into(), source })?;
    config.validate().map_err(|source| GameConfigFileError::Invalid { path: path.into(), source })?;
    Ok(config)
}

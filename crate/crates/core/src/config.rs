use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cards::{EventCard, PowerKind};
use crate::strategy::{ReasonTaxonomy, TaxonomyError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("player count must be 3 or 4, got {0}")]
    PlayerCount(usize),
    #[error("point values must be a non-empty list of positive even integers")]
    PointValues,
    #[error("board length must be at least 2, got {0}")]
    BoardLength(u32),
    #[error("`{0}` must be positive")]
    NotPositive(&'static str),
    #[error("{0} deck has no cards")]
    EmptyDeck(&'static str),
    #[error("event deck contains invalid card {0}")]
    InvalidEventCard(EventCard),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

/// Rule constants for one game. Every field has a default, so a JSON override
/// file only needs to name the fields it changes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    pub player_count: usize,
    pub point_values: Vec<u32>,
    pub board_length: u32,
    pub point_win_threshold: u32,
    pub discussion_message_cap: u32,
    pub discussion_time_limit_ms: u64,
    /// Redraws allowed per kind (strategy, points) per turn.
    pub max_redraws: u32,
    pub event_deck_weights: BTreeMap<EventCard, u32>,
    pub power_deck_weights: BTreeMap<PowerKind, u32>,
    pub reasons: ReasonTaxonomy,
    pub rng_seed: u64,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            player_count: 4,
            point_values: vec![12, 14, 16, 18, 20],
            board_length: 40,
            point_win_threshold: 100,
            discussion_message_cap: 3,
            discussion_time_limit_ms: 120_000,
            max_redraws: 1,
            event_deck_weights: EventCard::ALL.into_iter().map(|c| (c, 4)).collect(),
            power_deck_weights: PowerKind::ALL.into_iter().map(|c| (c, 4)).collect(),
            reasons: ReasonTaxonomy::default(),
            rng_seed: 0,
        }
    }
}

impl GameConfig {
    pub fn with_players(mut self, n: usize) -> Self {
        self.player_count = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn discussion_time_limit(&self) -> Duration {
        Duration::from_millis(self.discussion_time_limit_ms)
    }

    pub fn last_square(&self) -> u32 {
        self.board_length - 1
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(3..=4).contains(&self.player_count) {
            return Err(ConfigError::PlayerCount(self.player_count));
        }
        if self.point_values.is_empty() || self.point_values.iter().any(|&p| p == 0 || p % 2 != 0) {
            return Err(ConfigError::PointValues);
        }
        if self.board_length < 2 {
            return Err(ConfigError::BoardLength(self.board_length));
        }
        if self.point_win_threshold == 0 {
            return Err(ConfigError::NotPositive("point_win_threshold"));
        }
        if self.discussion_message_cap == 0 {
            return Err(ConfigError::NotPositive("discussion_message_cap"));
        }
        if self.discussion_time_limit_ms == 0 {
            return Err(ConfigError::NotPositive("discussion_time_limit_ms"));
        }
        if let Some(bad) = self.event_deck_weights.keys().find(|c| !c.is_valid()) {
            return Err(ConfigError::InvalidEventCard(*bad));
        }
        if self.event_deck_weights.values().sum::<u32>() == 0 {
            return Err(ConfigError::EmptyDeck("event"));
        }
        if self.power_deck_weights.values().sum::<u32>() == 0 {
            return Err(ConfigError::EmptyDeck("power"));
        }
        self.reasons.validate()?;
        Ok(())
    }
}

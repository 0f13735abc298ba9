//! Core of the MiBoard reading-strategy board game: the rules engine, the
//! text corpus, lobby matchmaking and the wire protocol. Everything here is
//! pure and deterministic; hosting lives in `miboard-server`.

use std::fmt;

use serde::{Deserialize, Serialize};

pub mod cards;
pub mod config;
pub mod corpus;
pub mod game;
pub mod lobby;
pub mod protocol;
#[cfg(any(test, feature = "test-support"))]
pub mod samples;
pub mod seed;
pub mod strategy;

pub use cards::{EventCard, PowerKind, PowerPlay};
pub use config::GameConfig;
pub use corpus::{reveal_window, Corpus, CorpusSession, TextId, TextRecord};
pub use game::{Action, Argument, GameError, GameState, Outcome, Phase, PlayerView, Span, TaskAssignment};
pub use lobby::{Lobby, RoomId};
pub use strategy::{ReasonCode, Strategy};

/// Opaque player identifier, unique within a server.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(String);

impl PlayerId {
    pub fn new(id: impl Into<String>) -> Self {
        PlayerId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PlayerId {
    fn from(s: &str) -> Self {
        PlayerId(s.to_string())
    }
}

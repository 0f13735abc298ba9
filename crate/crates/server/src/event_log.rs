//! Append-only JSON-Lines session log.
//!
//! One line per [`SessionEvent`]. Events of one game carry a gapless `seq`
//! starting at 1 with a `GameCreated` record, so a game can be rebuilt from
//! its log lines alone.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use miboard_core::game::{Action, GameSetup};
use miboard_core::protocol::MessageCode;
use miboard_core::{Phase, PlayerId, RoomId};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Events that are not game messages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Lifecycle {
    GameCreated,
    PlayerDisconnected,
    PlayerReconnected,
    PlayerForfeited,
    GameAborted,
    TextReplaced,
    TimerExpired,
}

impl Lifecycle {
    const ALL: [Lifecycle; 7] = [
        Lifecycle::GameCreated,
        Lifecycle::PlayerDisconnected,
        Lifecycle::PlayerReconnected,
        Lifecycle::PlayerForfeited,
        Lifecycle::GameAborted,
        Lifecycle::TextReplaced,
        Lifecycle::TimerExpired,
    ];

    fn as_str(self) -> &'static str {
        match self {
            Lifecycle::GameCreated => "GameCreated",
            Lifecycle::PlayerDisconnected => "PlayerDisconnected",
            Lifecycle::PlayerReconnected => "PlayerReconnected",
            Lifecycle::PlayerForfeited => "PlayerForfeited",
            Lifecycle::GameAborted => "GameAborted",
            Lifecycle::TextReplaced => "TextReplaced",
            Lifecycle::TimerExpired => "TimerExpired",
        }
    }
}

/// A message code or a lifecycle kind; serialized as its bare name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Code(MessageCode),
    Lifecycle(Lifecycle),
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Code(c) => c.as_str(),
            EventKind::Lifecycle(l) => l.as_str(),
        }
    }

    /// Kind recorded for an action a player asked for.
    pub fn for_request(action: &Action) -> EventKind {
        use MessageCode as C;
        let code = match action {
            Action::DrawTask => C::TaskDrawn,
            Action::RedrawStrategy { .. } | Action::RedrawPoints { .. } => C::Redraw,
            Action::SubmitSelfExplanation { .. } => C::SeSubmit,
            Action::SubmitGuess { .. } => C::Guess,
            Action::TallyFirstVote => C::Vote1Result,
            Action::PostDiscussion { .. } => C::DiscussMsg,
            Action::PassDiscussion { .. } => C::DiscussPass,
            Action::SubmitSecondVote { .. } => C::Vote2,
            Action::ScoreRound => C::ScoreResult,
            Action::PlayPower { .. } => C::PlayPower,
            Action::SkipPower { .. } => C::SkipPower,
            Action::RollAndMove { .. } => C::RollResult,
            Action::ReplaceText { .. } => return EventKind::Lifecycle(Lifecycle::TextReplaced),
            Action::Abort => return EventKind::Lifecycle(Lifecycle::GameAborted),
            Action::CloseDiscussion { .. } => return EventKind::Lifecycle(Lifecycle::TimerExpired),
            Action::Abstain { .. } | Action::SkipTurn => return EventKind::Lifecycle(Lifecycle::PlayerForfeited),
        };
        EventKind::Code(code)
    }

    pub fn is_timeout(self) -> bool {
        self == EventKind::Lifecycle(Lifecycle::TimerExpired)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if let Ok(c) = s.parse::<MessageCode>() {
            return Ok(EventKind::Code(c));
        }
        Lifecycle::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .map(EventKind::Lifecycle)
            .ok_or_else(|| format!("unknown event kind `{s}`"))
    }
}

impl Serialize for EventKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EventKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum EventPayload {
    /// Everything needed to rebuild the initial state.
    Created {
        setup: Box<GameSetup>,
    },
    Action {
        action: Action,
    },
    /// Recorded for analysis only; replay skips it.
    Note {
        detail: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionEvent {
    pub timestamp_ms: u64,
    pub room_id: RoomId,
    pub game_id: u64,
    pub seq: u64,
    pub kind: EventKind,
    pub actor: Option<PlayerId>,
    pub payload: EventPayload,
    pub resulting_phase: Phase,
    /// Hash of the game state after this event.
    pub state_hash: String,
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Where session events go. Implementations must persist an event before
/// returning so callers can broadcast its effects afterwards.
pub trait EventSink: Send + Sync {
    fn append(&self, event: &SessionEvent) -> io::Result<()>;
}

pub type SharedSink = Arc<dyn EventSink>;

/// JSON-Lines file, flushed after every event.
pub struct FileLog {
    out: Mutex<BufWriter<File>>,
}

impl FileLog {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(FileLog { out: Mutex::new(BufWriter::new(file)) })
    }
}

impl EventSink for FileLog {
    fn append(&self, event: &SessionEvent) -> io::Result<()> {
        let mut line = serde_json::to_string(event)?;
        line.push('\n');
        let mut out = self.out.lock().unwrap_or_else(|e| e.into_inner());
        out.write_all(line.as_bytes())?;
        out.flush()
    }
}

/// In-memory log for tests and simulations.
#[derive(Default)]
pub struct MemoryLog {
    events: Mutex<Vec<SessionEvent>>,
}

impl MemoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> Vec<SessionEvent> {
        self.events.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// The log as it would appear on disk.
    pub fn to_jsonl(&self) -> String {
        self.events().iter().map(|e| serde_json::to_string(e).expect("events serialize") + "\n").collect()
    }
}

impl EventSink for MemoryLog {
    fn append(&self, event: &SessionEvent) -> io::Result<()> {
        self.events.lock().unwrap_or_else(|e| e.into_inner()).push(event.clone());
        Ok(())
    }
}

/// Discards everything.
pub struct NullLog;

impl EventSink for NullLog {
    fn append(&self, _: &SessionEvent) -> io::Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip() {
        for code in MessageCode::ALL {
            let k = EventKind::Code(*code);
            assert_eq!(k.as_str().parse::<EventKind>(), Ok(k));
        }
        for l in Lifecycle::ALL {
            let k = EventKind::Lifecycle(l);
            assert_eq!(serde_json::from_str::<EventKind>(&serde_json::to_string(&k).unwrap()).unwrap(), k);
        }
        assert!("Nope".parse::<EventKind>().is_err());
    }
}

//! Rebuilds games from a session log.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use miboard_core::{GameError, GameState};
use thiserror::Error;

use crate::event_log::{EventPayload, SessionEvent};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("corrupt log line {line} at byte offset {offset}: {message}")]
    CorruptLine { line: usize, offset: usize, message: String },
    #[error("game {game_id}: expected seq {expected}, found {found} (line {line})")]
    GapDetected { game_id: u64, expected: u64, found: u64, line: usize },
    #[error("game {game_id} seq {seq}: first event must create the game")]
    MissingCreate { game_id: u64, seq: u64 },
    #[error("game {game_id} seq {seq}: rejected on replay: {source}")]
    Rejected { game_id: u64, seq: u64, source: GameError },
    #[error("game {game_id} seq {seq}: state hash {actual} differs from logged {logged}")]
    Divergence { game_id: u64, seq: u64, logged: String, actual: String },
}

/// Final state of every game in the log, keyed by game id.
pub fn replay(path: impl AsRef<Path>) -> Result<BTreeMap<u64, GameState>, ReplayError> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|source| ReplayError::Io { path: path.to_path_buf(), source })?;
    replay_str(&raw)
}

pub fn replay_str(log: &str) -> Result<BTreeMap<u64, GameState>, ReplayError> {
    Ok(parse_log(log)?.into_iter().map(|(id, g)| (id, g.state)).collect())
}

/// A game rebuilt from its events, with the last sequence number seen.
pub struct ReplayedGame {
    pub state: GameState,
    pub last_seq: u64,
}

pub fn parse_log(log: &str) -> Result<BTreeMap<u64, ReplayedGame>, ReplayError> {
    let mut games: BTreeMap<u64, ReplayedGame> = BTreeMap::new();
    let mut offset = 0;
    for (i, line) in log.split_inclusive('\n').enumerate() {
        let line_no = i + 1;
        let start = offset;
        offset += line.len();
        if line.trim().is_empty() {
            continue;
        }
        let event: SessionEvent = serde_json::from_str(line).map_err(|e| ReplayError::CorruptLine {
            line: line_no,
            offset: start,
            message: e.to_string(),
        })?;
        apply_event(&mut games, &event, line_no)?;
    }
    Ok(games)
}

fn apply_event(games: &mut BTreeMap<u64, ReplayedGame>, ev: &SessionEvent, line: usize) -> Result<(), ReplayError> {
    let (game_id, seq) = (ev.game_id, ev.seq);
    let expected = games.get(&game_id).map_or(1, |g| g.last_seq + 1);
    if seq != expected {
        return Err(ReplayError::GapDetected { game_id, expected, found: seq, line });
    }
    let rejected = |source| ReplayError::Rejected { game_id, seq, source };
    match (&ev.payload, games.get_mut(&game_id)) {
        (EventPayload::Created { setup }, None) => {
            let state = GameState::from_setup((**setup).clone()).map_err(rejected)?;
            games.insert(game_id, ReplayedGame { state, last_seq: 0 });
        }
        (EventPayload::Action { action }, Some(g)) => {
            g.state.apply(action).map_err(rejected)?;
        }
        (EventPayload::Note { .. }, Some(_)) => {}
        _ => return Err(ReplayError::MissingCreate { game_id, seq }),
    }
    let g = games.get_mut(&game_id).expect("present");
    g.last_seq = seq;
    let actual = g.state.state_hash();
    if actual != ev.state_hash {
        return Err(ReplayError::Divergence { game_id, seq, logged: ev.state_hash.clone(), actual });
    }
    Ok(())
}

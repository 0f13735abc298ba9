//! Host-side stepping shared by the server and the in-process simulator, so
//! both drive a game through exactly the same sequence of actions.

use thiserror::Error;

use super::{Action, GameError, GameSetup, GameState, Phase};
use crate::config::GameConfig;
use crate::corpus::{Corpus, CorpusError, CorpusSession};
use crate::seed::{derive_seed, CORPUS_STREAM, RESET_STREAM};
use crate::PlayerId;

#[derive(Debug, Error)]
pub enum StartError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// A freshly created game with everything needed to log and rebuild it.
#[derive(Clone, Debug)]
pub struct Started {
    pub setup: GameSetup,
    pub state: GameState,
    pub session: CorpusSession,
}

/// Creates a room's first game: the corpus session and the game RNG are both
/// derived from `room_seed`.
pub fn start_game(
    config: &GameConfig,
    players: Vec<PlayerId>,
    room_seed: u64,
    corpus: &Corpus,
) -> Result<Started, StartError> {
    let mut session = CorpusSession::new(corpus, derive_seed(room_seed, CORPUS_STREAM));
    let text = session.select_text(corpus)?.clone();
    let config = config.clone().with_players(players.len()).with_seed(room_seed);
    let setup = GameSetup { config, players, text, used_text_ids: Vec::new() };
    let state = GameState::from_setup(setup.clone())?;
    Ok(Started { setup, state, session })
}

/// Seed for the `n`th reset (counting from 1) of a room.
pub fn reset_seed(room_seed: u64, n: u64) -> u64 {
    derive_seed(derive_seed(room_seed, RESET_STREAM), n)
}

/// Starts the next game in a room whose game is over, keeping its roster,
/// config and corpus session.
pub fn restart_game(
    state: &GameState,
    mut session: CorpusSession,
    seed: u64,
    corpus: &Corpus,
) -> Result<Started, StartError> {
    let text = session.select_text(corpus)?.clone();
    let setup = state.reset_setup(seed, text);
    let state = state.reset(seed, setup.text.clone())?;
    Ok(Started { setup, state, session })
}

/// The next step the host takes without player input, if any: loading a new
/// text, drawing the task, tallying, scoring, and skipping the power window
/// for a reader with no cards.
pub fn system_step(state: &GameState, session: &mut CorpusSession, corpus: &Corpus) -> Option<Action> {
    match state.phase() {
        Phase::TaskDraw if state.needs_text() => {
            let text = session.select_text(corpus).ok()?.clone();
            Some(Action::ReplaceText { text })
        }
        Phase::TaskDraw => Some(Action::DrawTask),
        Phase::FirstTally => Some(Action::TallyFirstVote),
        Phase::Scoring => Some(Action::ScoreRound),
        Phase::PowerWindow if state.players()[state.reader_seat()].power_cards.is_empty() => {
            Some(Action::SkipPower { player: state.reader().clone() })
        }
        _ => None,
    }
}

/// The action that stands in for `player` when they time out or leave:
/// a composing reader loses the turn, voters abstain, discussants pass, and
/// a reader past scoring skips the power card and rolls.
pub fn forfeit_action(state: &GameState, player: &PlayerId) -> Option<Action> {
    if !state.pending_actors().contains(player) {
        return None;
    }
    let player = player.clone();
    match state.phase() {
        Phase::ReaderComposing => Some(Action::SkipTurn),
        Phase::Guessing | Phase::SecondVote => Some(Action::Abstain { player }),
        Phase::Discussion => Some(Action::PassDiscussion { player }),
        Phase::PowerWindow => Some(Action::SkipPower { player }),
        Phase::RollAndMove => Some(Action::RollAndMove { player }),
        _ => None,
    }
}

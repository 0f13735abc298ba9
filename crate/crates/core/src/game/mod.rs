//! Deterministic rules engine for a single game.
//!
//! A [`GameState`] owns everything needed to continue a game, including the
//! random generator, so a serialized state is a complete checkpoint. All
//! mutation goes through the operation methods or through [`GameState::apply`],
//! which dispatches a serializable [`Action`]. Nothing here reads a clock:
//! elapsed time arrives as a value inside `CloseDiscussion`.

mod action;
pub mod autopilot;
pub mod scoring;
mod view;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cards::{Deck, EventCard, PowerKind, PowerPlay};
use crate::config::{ConfigError, GameConfig};
use crate::corpus::{RecordError, TextId, TextRecord};
use crate::strategy::{ReasonCode, Strategy};
use crate::PlayerId;

pub use action::{Action, Outcome};
pub use scoring::ScoreOutcome;
pub use view::{PlayerView, PublicPlayer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Lobby,
    TaskDraw,
    ReaderComposing,
    Guessing,
    FirstTally,
    Discussion,
    SecondVote,
    Scoring,
    PowerWindow,
    RollAndMove,
    GameOver,
}

impl Phase {
    pub const ALL: [Phase; 11] = [
        Phase::Lobby,
        Phase::TaskDraw,
        Phase::ReaderComposing,
        Phase::Guessing,
        Phase::FirstTally,
        Phase::Discussion,
        Phase::SecondVote,
        Phase::Scoring,
        Phase::PowerWindow,
        Phase::RollAndMove,
        Phase::GameOver,
    ];

    /// The declared phase graph. Self-loops are listed for phases that
    /// accumulate several submissions. Any live phase may abort to `GameOver`.
    pub fn is_legal_edge(from: Phase, to: Phase) -> bool {
        use Phase::*;
        if to == GameOver && from != Lobby {
            return true;
        }
        matches!(
            (from, to),
            (Lobby, TaskDraw)
                | (TaskDraw, TaskDraw)
                | (TaskDraw, ReaderComposing)
                | (ReaderComposing, ReaderComposing)
                | (ReaderComposing, Guessing)
                | (ReaderComposing, TaskDraw)
                | (Guessing, Guessing)
                | (Guessing, FirstTally)
                | (FirstTally, PowerWindow)
                | (FirstTally, Discussion)
                | (Discussion, Discussion)
                | (Discussion, SecondVote)
                | (SecondVote, SecondVote)
                | (SecondVote, Scoring)
                | (Scoring, PowerWindow)
                | (PowerWindow, RollAndMove)
                | (RollAndMove, TaskDraw)
                | (GameOver, TaskDraw)
        )
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskAssignment {
    pub specified_strategy: Strategy,
    pub point_value: u32,
    pub strategy_redraws_used: u32,
    pub point_redraws_used: u32,
}

/// Half-open character range `[start, end)` into a self-explanation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

/// A cascading-menu-block justification.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Argument {
    pub chosen_strategy: Strategy,
    pub reason_code: ReasonCode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub highlight_span: Option<Span>,
}

impl Argument {
    pub fn new(strategy: Strategy, reason: impl Into<String>, span: Option<Span>) -> Self {
        Argument { chosen_strategy: strategy, reason_code: ReasonCode::new(reason), highlight_span: span }
    }

    /// An argument with reason `Other` and no highlight.
    pub fn other(strategy: Strategy) -> Self {
        Argument { chosen_strategy: strategy, reason_code: ReasonCode::other(), highlight_span: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerState {
    pub id: PlayerId,
    pub score: u32,
    pub token_position: u32,
    pub power_cards: Vec<PowerKind>,
    pub frozen_turns: u32,
    pub discussion_messages_used: u32,
    pub passed_discussion: bool,
}

impl PlayerState {
    fn new(id: PlayerId) -> Self {
        PlayerState {
            id,
            score: 0,
            token_position: 0,
            power_cards: Vec::new(),
            frozen_turns: 0,
            discussion_messages_used: 0,
            passed_discussion: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscussionLine {
    pub player: PlayerId,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DieRoll {
    pub dice: Vec<u32>,
    pub total: u32,
}

/// Everything that happened during one reader's turn.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub reader_id: PlayerId,
    pub turn: u32,
    /// 1-based index of the sentence being self-explained.
    pub target_sentence: usize,
    pub task: TaskAssignment,
    pub self_explanation: Option<String>,
    /// Includes the reader's implicit argument for the specified strategy.
    pub first_votes: BTreeMap<PlayerId, Argument>,
    pub first_abstentions: BTreeSet<PlayerId>,
    pub unanimous: Option<bool>,
    pub discussion_transcript: Vec<DiscussionLine>,
    pub second_votes: BTreeMap<PlayerId, Vec<Argument>>,
    pub second_abstentions: BTreeSet<PlayerId>,
    pub accepted: Vec<Strategy>,
    pub score_deltas: BTreeMap<PlayerId, u32>,
    pub power_played: Option<PowerPlay>,
    pub die_roll: Option<DieRoll>,
    pub event_drawn: Option<EventCard>,
    pub skipped: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirstTally {
    pub unanimous: bool,
    pub score: Option<ScoreOutcome>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveOutcome {
    pub roll: DieRoll,
    pub from: u32,
    pub landed: u32,
    pub event: Option<EventCard>,
    pub position: u32,
    pub power_drawn: Option<PowerKind>,
    pub winner: Option<PlayerId>,
    /// Reader for the next turn, `None` when the game ended.
    pub next_reader: Option<PlayerId>,
}

/// Inputs that fully determine a fresh game.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameSetup {
    pub config: GameConfig,
    pub players: Vec<PlayerId>,
    pub text: TextRecord,
    #[serde(default)]
    pub used_text_ids: Vec<TextId>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GameError {
    #[error("game needs 3 or 4 players matching the configured count, got {0}")]
    WrongPlayerCount(usize),
    #[error("player `{0}` listed twice")]
    DuplicatePlayer(PlayerId),
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("invalid text: {0}")]
    Text(#[from] RecordError),
    #[error("not allowed during {actual}")]
    WrongPhase { actual: Phase },
    #[error("unknown player `{0}`")]
    UnknownPlayer(PlayerId),
    #[error("only the reader may do that")]
    NotReader,
    #[error("the reader does not guess")]
    ReaderCannotGuess,
    #[error("redraw budget exhausted")]
    RedrawExhausted,
    #[error("self-explanation is empty")]
    EmptySelfExplanation,
    #[error("self-explanation is too similar to the original sentence")]
    TooSimilar,
    #[error("vote already recorded")]
    DuplicateVote,
    #[error("highlight span outside the self-explanation")]
    InvalidSpan,
    #[error("a highlight span is required unless the reason is `Other`")]
    MissingSpan,
    #[error("reason `{reason}` is not listed for {strategy:?}")]
    InvalidReason { strategy: Strategy, reason: ReasonCode },
    #[error("discussion message cap reached")]
    CapExceeded,
    #[error("player already passed the discussion")]
    AlreadyPassed,
    #[error("discussion time limit not reached")]
    DiscussionStillOpen,
    #[error("vote must select at least one strategy")]
    EmptyVote,
    #[error("the same strategy appears twice in one vote")]
    DuplicateStrategy,
    #[error("the reader's vote must include the specified strategy")]
    ReaderMustDefend,
    #[error("power card not held")]
    CardNotHeld,
    #[error("invalid power card target")]
    InvalidTarget,
    #[error("every target sentence of the current text has been used")]
    TextExhausted,
    #[error("current text still has target sentences")]
    TextNotExhausted,
}

impl GameError {
    /// Stable camelCase identifier used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            GameError::WrongPlayerCount(_) => "wrongPlayerCount",
            GameError::DuplicatePlayer(_) => "duplicatePlayer",
            GameError::Config(_) => "invalidConfig",
            GameError::Text(_) => "invalidText",
            GameError::WrongPhase { .. } => "wrongPhase",
            GameError::UnknownPlayer(_) => "unknownPlayer",
            GameError::NotReader => "notReader",
            GameError::ReaderCannotGuess => "readerCannotGuess",
            GameError::RedrawExhausted => "redrawExhausted",
            GameError::EmptySelfExplanation => "emptySelfExplanation",
            GameError::TooSimilar => "tooSimilar",
            GameError::DuplicateVote => "duplicateVote",
            GameError::InvalidSpan => "invalidSpan",
            GameError::MissingSpan => "missingSpan",
            GameError::InvalidReason { .. } => "invalidReason",
            GameError::CapExceeded => "capExceeded",
            GameError::AlreadyPassed => "alreadyPassed",
            GameError::DiscussionStillOpen => "discussionStillOpen",
            GameError::EmptyVote => "emptyVote",
            GameError::DuplicateStrategy => "duplicateStrategy",
            GameError::ReaderMustDefend => "readerMustDefend",
            GameError::CardNotHeld => "cardNotHeld",
            GameError::InvalidTarget => "invalidTarget",
            GameError::TextExhausted => "textExhausted",
            GameError::TextNotExhausted => "textNotExhausted",
        }
    }
}

pub type GameResult<T> = Result<T, GameError>;

/// Authoritative state of one game.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameState {
    config: GameConfig,
    players: Vec<PlayerState>,
    phase: Phase,
    reader: usize,
    /// Reader turns started so far (1-based once the first task is drawn).
    turn: u32,
    text: TextRecord,
    /// Targets of the current text consumed so far.
    text_turn: usize,
    used_text_ids: Vec<TextId>,
    round: Option<RoundRecord>,
    last_round: Option<RoundRecord>,
    extra_turn_pending: bool,
    double_dice_pending: bool,
    winner: Option<PlayerId>,
    aborted: bool,
    event_deck: Deck<EventCard>,
    power_deck: Deck<PowerKind>,
    rng: ChaCha8Rng,
}

fn normalize(text: &str) -> String {
    text.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

impl GameState {
    pub fn new_game(config: GameConfig, players: Vec<PlayerId>, text: TextRecord) -> GameResult<Self> {
        Self::from_setup(GameSetup { config, players, text, used_text_ids: Vec::new() })
    }

    pub fn from_setup(setup: GameSetup) -> GameResult<Self> {
        let GameSetup { config, players, text, mut used_text_ids } = setup;
        if !(3..=4).contains(&players.len()) || players.len() != config.player_count {
            return Err(GameError::WrongPlayerCount(players.len()));
        }
        for (i, p) in players.iter().enumerate() {
            if players[..i].contains(p) {
                return Err(GameError::DuplicatePlayer(p.clone()));
            }
        }
        config.validate()?;
        text.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let event_deck = Deck::from_weights(&config.event_deck_weights, &mut rng);
        let power_deck = Deck::from_weights(&config.power_deck_weights, &mut rng);
        if !used_text_ids.contains(&text.id) {
            used_text_ids.push(text.id.clone());
        }
        Ok(GameState {
            players: players.into_iter().map(PlayerState::new).collect(),
            phase: Phase::TaskDraw,
            reader: 0,
            turn: 0,
            text,
            text_turn: 0,
            used_text_ids,
            round: None,
            last_round: None,
            extra_turn_pending: false,
            double_dice_pending: false,
            winner: None,
            aborted: false,
            event_deck,
            power_deck,
            rng,
            config,
        })
    }

    // ---- accessors ----

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn players(&self) -> &[PlayerState] {
        &self.players
    }

    pub fn player(&self, id: &PlayerId) -> Option<&PlayerState> {
        self.players.iter().find(|p| &p.id == id)
    }

    pub fn player_ids(&self) -> Vec<PlayerId> {
        self.players.iter().map(|p| p.id.clone()).collect()
    }

    pub fn seat_of(&self, id: &PlayerId) -> Option<usize> {
        self.players.iter().position(|p| &p.id == id)
    }

    pub fn reader(&self) -> &PlayerId {
        &self.players[self.reader].id
    }

    pub fn reader_seat(&self) -> usize {
        self.reader
    }

    pub fn turn(&self) -> u32 {
        self.turn
    }

    pub fn text(&self) -> &TextRecord {
        &self.text
    }

    pub fn text_turn(&self) -> usize {
        self.text_turn
    }

    pub fn used_text_ids(&self) -> &[TextId] {
        &self.used_text_ids
    }

    pub fn round(&self) -> Option<&RoundRecord> {
        self.round.as_ref()
    }

    pub fn last_round(&self) -> Option<&RoundRecord> {
        self.last_round.as_ref()
    }

    pub fn task(&self) -> Option<&TaskAssignment> {
        self.round.as_ref().map(|r| &r.task)
    }

    pub fn winner(&self) -> Option<&PlayerId> {
        self.winner.as_ref()
    }

    pub fn is_aborted(&self) -> bool {
        self.aborted
    }

    pub fn is_over(&self) -> bool {
        self.phase == Phase::GameOver
    }

    pub fn double_dice_pending(&self) -> bool {
        self.double_dice_pending
    }

    pub fn extra_turn_pending(&self) -> bool {
        self.extra_turn_pending
    }

    /// True when the current text has no unrevealed target left, so a new
    /// text must be loaded before the next task can be drawn.
    pub fn needs_text(&self) -> bool {
        self.phase == Phase::TaskDraw && self.text_turn >= self.text.targets.len()
    }

    /// Canonical JSON form. Field order is fixed by declaration and every map
    /// is ordered, so equal states serialize to equal bytes.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("game state is always serializable")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn state_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_canonical_json().as_bytes()))
    }

    /// Players whose input the game is waiting for, in seat order. Empty when
    /// the next step belongs to the host (drawing, tallying, scoring) or the
    /// game is over.
    pub fn pending_actors(&self) -> Vec<PlayerId> {
        let reader = self.reader().clone();
        let Some(round) = &self.round else {
            return Vec::new();
        };
        match self.phase {
            Phase::ReaderComposing | Phase::PowerWindow | Phase::RollAndMove => vec![reader],
            Phase::Guessing => self
                .players
                .iter()
                .filter(|p| {
                    p.id != reader && !round.first_votes.contains_key(&p.id) && !round.first_abstentions.contains(&p.id)
                })
                .map(|p| p.id.clone())
                .collect(),
            Phase::Discussion => {
                self.players.iter().filter(|p| !self.discussion_done(p)).map(|p| p.id.clone()).collect()
            }
            Phase::SecondVote => self
                .players
                .iter()
                .filter(|p| !round.second_votes.contains_key(&p.id) && !round.second_abstentions.contains(&p.id))
                .map(|p| p.id.clone())
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Whether `player` may send free chat right now: always in discussion,
    /// otherwise only when nothing is expected from them.
    pub fn chat_allowed(&self, player: &PlayerId) -> bool {
        self.phase == Phase::Discussion || !self.pending_actors().contains(player)
    }

    /// Winner by board or by points. Several qualifying players are ordered by
    /// higher score, then earlier join order.
    pub fn check_win(&self) -> Option<PlayerId> {
        let last = self.config.last_square();
        self.players
            .iter()
            .enumerate()
            .filter(|(_, p)| p.token_position >= last || p.score >= self.config.point_win_threshold)
            .min_by_key(|(seat, p)| (std::cmp::Reverse(p.score), *seat))
            .map(|(_, p)| p.id.clone())
    }

    // ---- guards ----

    fn expect_phase(&self, phase: Phase) -> GameResult<()> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(GameError::WrongPhase { actual: self.phase })
        }
    }

    fn seat(&self, id: &PlayerId) -> GameResult<usize> {
        self.seat_of(id).ok_or_else(|| GameError::UnknownPlayer(id.clone()))
    }

    fn expect_reader(&self, id: &PlayerId) -> GameResult<()> {
        if self.seat(id)? == self.reader {
            Ok(())
        } else {
            Err(GameError::NotReader)
        }
    }

    fn round_mut(&mut self) -> &mut RoundRecord {
        self.round.as_mut().expect("a round is open outside TaskDraw and GameOver")
    }

    fn discussion_done(&self, p: &PlayerState) -> bool {
        p.passed_discussion || p.discussion_messages_used >= self.config.discussion_message_cap
    }

    fn validate_argument(&self, arg: &Argument) -> GameResult<()> {
        if !self.config.reasons.allows(arg.chosen_strategy, &arg.reason_code) {
            return Err(GameError::InvalidReason { strategy: arg.chosen_strategy, reason: arg.reason_code.clone() });
        }
        let se_len = self.round.as_ref().and_then(|r| r.self_explanation.as_deref()).map_or(0, |s| s.chars().count());
        match arg.highlight_span {
            Some(Span { start, end }) if start >= end || end > se_len => Err(GameError::InvalidSpan),
            None if !arg.reason_code.is_other() => Err(GameError::MissingSpan),
            _ => Ok(()),
        }
    }

    // ---- task ----

    pub fn draw_task(&mut self) -> GameResult<TaskAssignment> {
        self.expect_phase(Phase::TaskDraw)?;
        if self.needs_text() {
            return Err(GameError::TextExhausted);
        }
        let specified_strategy = *Strategy::ALL.choose(&mut self.rng).expect("five strategies");
        let point_value = *self.config.point_values.choose(&mut self.rng).expect("validated non-empty");
        let task = TaskAssignment { specified_strategy, point_value, strategy_redraws_used: 0, point_redraws_used: 0 };
        self.turn += 1;
        self.text_turn += 1;
        self.round = Some(RoundRecord {
            reader_id: self.reader().clone(),
            turn: self.turn,
            target_sentence: self.text.targets[self.text_turn - 1],
            task,
            self_explanation: None,
            first_votes: BTreeMap::new(),
            first_abstentions: BTreeSet::new(),
            unanimous: None,
            discussion_transcript: Vec::new(),
            second_votes: BTreeMap::new(),
            second_abstentions: BTreeSet::new(),
            accepted: Vec::new(),
            score_deltas: BTreeMap::new(),
            power_played: None,
            die_roll: None,
            event_drawn: None,
            skipped: false,
        });
        self.phase = Phase::ReaderComposing;
        Ok(task)
    }

    /// Loads the next text once the current one has no targets left. Reveal
    /// restarts from the first sentence.
    pub fn replace_text(&mut self, text: TextRecord) -> GameResult<()> {
        self.expect_phase(Phase::TaskDraw)?;
        if !self.needs_text() {
            return Err(GameError::TextNotExhausted);
        }
        text.validate()?;
        if !self.used_text_ids.contains(&text.id) {
            self.used_text_ids.push(text.id.clone());
        }
        self.text = text;
        self.text_turn = 0;
        Ok(())
    }

    pub fn redraw_strategy(&mut self) -> GameResult<TaskAssignment> {
        self.expect_phase(Phase::ReaderComposing)?;
        let max = self.config.max_redraws;
        let current = *self.task().expect("open round");
        if current.strategy_redraws_used >= max {
            return Err(GameError::RedrawExhausted);
        }
        let others: Vec<Strategy> = Strategy::ALL.into_iter().filter(|s| *s != current.specified_strategy).collect();
        let strategy = *others.choose(&mut self.rng).expect("four alternatives");
        let task = &mut self.round_mut().task;
        task.specified_strategy = strategy;
        task.strategy_redraws_used += 1;
        Ok(*task)
    }

    pub fn redraw_points(&mut self) -> GameResult<TaskAssignment> {
        self.expect_phase(Phase::ReaderComposing)?;
        let max = self.config.max_redraws;
        let current = *self.task().expect("open round");
        if current.point_redraws_used >= max {
            return Err(GameError::RedrawExhausted);
        }
        let mut others: Vec<u32> =
            self.config.point_values.iter().copied().filter(|p| *p != current.point_value).collect();
        if others.is_empty() {
            others.push(current.point_value);
        }
        let value = *others.choose(&mut self.rng).expect("non-empty");
        let task = &mut self.round_mut().task;
        task.point_value = value;
        task.point_redraws_used += 1;
        Ok(*task)
    }

    // ---- composing and guessing ----

    pub fn submit_self_explanation(&mut self, reader: &PlayerId, text: &str) -> GameResult<()> {
        self.expect_phase(Phase::ReaderComposing)?;
        self.expect_reader(reader)?;
        if text.trim().is_empty() {
            return Err(GameError::EmptySelfExplanation);
        }
        let target = self.text.target_sentence(self.text_turn).unwrap_or_default();
        if normalize(text) == normalize(target) {
            return Err(GameError::TooSimilar);
        }
        let round = self.round_mut();
        let specified = round.task.specified_strategy;
        round.self_explanation = Some(text.to_string());
        round.first_votes.insert(reader.clone(), Argument::other(specified));
        self.phase = Phase::Guessing;
        Ok(())
    }

    /// Records a guesser's first-round argument. Returns true when it was the
    /// last one outstanding.
    pub fn submit_guess(&mut self, guesser: &PlayerId, argument: Argument) -> GameResult<bool> {
        self.expect_phase(Phase::Guessing)?;
        if self.seat(guesser)? == self.reader {
            return Err(GameError::ReaderCannotGuess);
        }
        let round = self.round.as_ref().expect("open round");
        if round.first_votes.contains_key(guesser) || round.first_abstentions.contains(guesser) {
            return Err(GameError::DuplicateVote);
        }
        self.validate_argument(&argument)?;
        self.round_mut().first_votes.insert(guesser.clone(), argument);
        Ok(self.finish_guessing_if_complete())
    }

    fn finish_guessing_if_complete(&mut self) -> bool {
        if self.pending_actors().is_empty() {
            self.phase = Phase::FirstTally;
            true
        } else {
            false
        }
    }

    /// Records that a player gives up their vote in the current voting phase.
    /// Used by the host when a player times out or disconnects.
    pub fn abstain(&mut self, player: &PlayerId) -> GameResult<()> {
        let seat = self.seat(player)?;
        match self.phase {
            Phase::Guessing => {
                if seat == self.reader {
                    return Err(GameError::ReaderCannotGuess);
                }
                let round = self.round.as_ref().expect("open round");
                if round.first_votes.contains_key(player) || round.first_abstentions.contains(player) {
                    return Err(GameError::DuplicateVote);
                }
                self.round_mut().first_abstentions.insert(player.clone());
                self.finish_guessing_if_complete();
                Ok(())
            }
            Phase::SecondVote => {
                let round = self.round.as_ref().expect("open round");
                if round.second_votes.contains_key(player) || round.second_abstentions.contains(player) {
                    return Err(GameError::DuplicateVote);
                }
                self.round_mut().second_abstentions.insert(player.clone());
                self.finish_second_vote_if_complete();
                Ok(())
            }
            actual => Err(GameError::WrongPhase { actual }),
        }
    }

    // ---- first tally ----

    /// Unanimous first votes are scored immediately; anything else opens a
    /// discussion.
    pub fn tally_first_vote(&mut self) -> GameResult<FirstTally> {
        self.expect_phase(Phase::FirstTally)?;
        let round = self.round.as_ref().expect("open round");
        let specified = round.task.specified_strategy;
        let unanimous = round.first_votes.values().all(|a| a.chosen_strategy == specified);
        self.round_mut().unanimous = Some(unanimous);
        if unanimous {
            let votes: BTreeMap<PlayerId, BTreeSet<Strategy>> = self
                .round_mut()
                .first_votes
                .iter()
                .map(|(p, a)| (p.clone(), BTreeSet::from([a.chosen_strategy])))
                .collect();
            let score = self.apply_score(&votes);
            Ok(FirstTally { unanimous, score: Some(score) })
        } else {
            for p in &mut self.players {
                p.discussion_messages_used = 0;
                p.passed_discussion = false;
            }
            self.phase = Phase::Discussion;
            Ok(FirstTally { unanimous, score: None })
        }
    }

    // ---- discussion ----

    pub fn post_discussion_message(&mut self, player: &PlayerId, text: &str) -> GameResult<()> {
        self.expect_phase(Phase::Discussion)?;
        let seat = self.seat(player)?;
        let cap = self.config.discussion_message_cap;
        let p = &mut self.players[seat];
        if p.passed_discussion {
            return Err(GameError::AlreadyPassed);
        }
        if p.discussion_messages_used >= cap {
            return Err(GameError::CapExceeded);
        }
        p.discussion_messages_used += 1;
        self.round_mut().discussion_transcript.push(DiscussionLine { player: player.clone(), text: text.to_string() });
        self.finish_discussion_if_complete();
        Ok(())
    }

    pub fn pass_discussion(&mut self, player: &PlayerId) -> GameResult<()> {
        self.expect_phase(Phase::Discussion)?;
        let seat = self.seat(player)?;
        if self.players[seat].passed_discussion {
            return Err(GameError::AlreadyPassed);
        }
        self.players[seat].passed_discussion = true;
        self.finish_discussion_if_complete();
        Ok(())
    }

    pub fn close_discussion(&mut self, elapsed: Duration) -> GameResult<()> {
        self.expect_phase(Phase::Discussion)?;
        if elapsed < self.config.discussion_time_limit() {
            return Err(GameError::DiscussionStillOpen);
        }
        self.phase = Phase::SecondVote;
        Ok(())
    }

    fn finish_discussion_if_complete(&mut self) {
        if self.players.iter().all(|p| self.discussion_done(p)) {
            self.phase = Phase::SecondVote;
        }
    }

    // ---- second vote and scoring ----

    pub fn submit_second_vote(&mut self, player: &PlayerId, arguments: Vec<Argument>) -> GameResult<bool> {
        self.expect_phase(Phase::SecondVote)?;
        let seat = self.seat(player)?;
        let round = self.round.as_ref().expect("open round");
        if round.second_votes.contains_key(player) || round.second_abstentions.contains(player) {
            return Err(GameError::DuplicateVote);
        }
        if arguments.is_empty() {
            return Err(GameError::EmptyVote);
        }
        let mut seen = BTreeSet::new();
        for arg in &arguments {
            if !seen.insert(arg.chosen_strategy) {
                return Err(GameError::DuplicateStrategy);
            }
            self.validate_argument(arg)?;
        }
        if seat == self.reader && !seen.contains(&round.task.specified_strategy) {
            return Err(GameError::ReaderMustDefend);
        }
        self.round_mut().second_votes.insert(player.clone(), arguments);
        Ok(self.finish_second_vote_if_complete())
    }

    fn finish_second_vote_if_complete(&mut self) -> bool {
        if self.pending_actors().is_empty() {
            self.phase = Phase::Scoring;
            true
        } else {
            false
        }
    }

    /// Scores the collected second-round votes.
    pub fn score_round(&mut self) -> GameResult<ScoreOutcome> {
        self.expect_phase(Phase::Scoring)?;
        let votes: BTreeMap<PlayerId, BTreeSet<Strategy>> = self
            .round_mut()
            .second_votes
            .iter()
            .map(|(p, args)| (p.clone(), args.iter().map(|a| a.chosen_strategy).collect()))
            .collect();
        Ok(self.apply_score(&votes))
    }

    fn apply_score(&mut self, votes: &BTreeMap<PlayerId, BTreeSet<Strategy>>) -> ScoreOutcome {
        let ids = self.player_ids();
        let reader = self.reader().clone();
        let task = self.round_mut().task;
        let outcome = scoring::score_votes(votes, &ids, &reader, task.specified_strategy, task.point_value);
        for p in &mut self.players {
            p.score += outcome.deltas.get(&p.id).copied().unwrap_or(0);
        }
        let round = self.round_mut();
        round.accepted = outcome.accepted.clone();
        round.score_deltas = outcome.deltas.clone();
        self.phase = Phase::PowerWindow;
        outcome
    }

    // ---- power cards, dice, movement ----

    pub fn play_power_card(&mut self, reader: &PlayerId, card: PowerPlay) -> GameResult<()> {
        self.expect_phase(Phase::PowerWindow)?;
        self.expect_reader(reader)?;
        let kind = card.kind();
        let hand_idx =
            self.players[self.reader].power_cards.iter().position(|k| *k == kind).ok_or(GameError::CardNotHeld)?;
        match &card {
            PowerPlay::ExtraTurn => self.extra_turn_pending = true,
            PowerPlay::DoubleDice => self.double_dice_pending = true,
            PowerPlay::FreezePlayer { target } => {
                let t = self.seat_of(target).ok_or(GameError::InvalidTarget)?;
                if t == self.reader {
                    return Err(GameError::InvalidTarget);
                }
                self.players[t].frozen_turns += 1;
            }
        }
        self.players[self.reader].power_cards.remove(hand_idx);
        self.power_deck.discard(kind);
        self.round_mut().power_played = Some(card);
        self.phase = Phase::RollAndMove;
        Ok(())
    }

    pub fn skip_power(&mut self) -> GameResult<()> {
        self.expect_phase(Phase::PowerWindow)?;
        self.phase = Phase::RollAndMove;
        Ok(())
    }

    pub fn roll_and_move(&mut self) -> GameResult<MoveOutcome> {
        self.expect_phase(Phase::RollAndMove)?;
        let dice_count = if self.double_dice_pending { 2 } else { 1 };
        self.double_dice_pending = false;
        let dice: Vec<u32> = (0..dice_count).map(|_| self.rng.gen_range(1..=6)).collect();
        let total = dice.iter().sum();
        let roll = DieRoll { dice, total };

        let last = self.config.last_square();
        let from = self.players[self.reader].token_position;
        let landed = (from + total).min(last);
        let mut position = landed;
        let mut event = None;
        let mut power_drawn = None;
        if landed < last {
            let card = self.event_deck.draw(&mut self.rng).expect("validated non-empty event deck");
            self.event_deck.discard(card);
            event = Some(card);
            match card {
                EventCard::Forward(n) => position = (landed + u32::from(n)).min(last),
                EventCard::Backward(n) => position = landed.saturating_sub(u32::from(n)),
                EventCard::DrawPower => {
                    power_drawn = self.power_deck.draw(&mut self.rng);
                    if let Some(k) = power_drawn {
                        self.players[self.reader].power_cards.push(k);
                    }
                }
            }
        }
        self.players[self.reader].token_position = position;
        let round = self.round_mut();
        round.die_roll = Some(roll.clone());
        round.event_drawn = event;

        let winner = self.check_win();
        let next_reader = if let Some(w) = &winner {
            self.winner = Some(w.clone());
            self.last_round = self.round.take();
            self.phase = Phase::GameOver;
            None
        } else {
            self.end_turn();
            Some(self.reader().clone())
        };
        Ok(MoveOutcome { roll, from, landed, event, position, power_drawn, winner, next_reader })
    }

    /// Ends the reader's turn without scoring or moving. Used by the host when
    /// the reader times out or disconnects while composing.
    pub fn skip_turn(&mut self) -> GameResult<()> {
        self.expect_phase(Phase::ReaderComposing)?;
        let ids = self.player_ids();
        let round = self.round_mut();
        round.skipped = true;
        round.score_deltas = ids.into_iter().map(|p| (p, 0)).collect();
        self.end_turn();
        Ok(())
    }

    fn end_turn(&mut self) {
        self.last_round = self.round.take();
        if self.extra_turn_pending {
            self.extra_turn_pending = false;
        } else {
            let n = self.players.len();
            let mut next = self.reader;
            loop {
                next = (next + 1) % n;
                let p = &mut self.players[next];
                if p.frozen_turns > 0 {
                    p.frozen_turns -= 1;
                    continue;
                }
                break;
            }
            self.reader = next;
        }
        self.phase = Phase::TaskDraw;
    }

    pub fn abort(&mut self) -> GameResult<()> {
        if self.phase == Phase::GameOver {
            return Err(GameError::WrongPhase { actual: self.phase });
        }
        self.aborted = true;
        self.last_round = self.round.take();
        self.phase = Phase::GameOver;
        Ok(())
    }

    /// A fresh game with the same roster and config, a new seed and a new
    /// text. Only legal once the game is over.
    pub fn reset(&self, seed: u64, text: TextRecord) -> GameResult<GameState> {
        self.expect_phase(Phase::GameOver)?;
        GameState::from_setup(self.reset_setup(seed, text))
    }

    pub fn reset_setup(&self, seed: u64, text: TextRecord) -> GameSetup {
        GameSetup {
            config: self.config.clone().with_seed(seed),
            players: self.player_ids(),
            text,
            used_text_ids: self.used_text_ids.clone(),
        }
    }
}

//! One room's game, driven without any I/O.
//!
//! The caller feeds player requests, connection changes and clock ticks in,
//! and delivers the returned [`Outbound`] messages. Every state change is
//! appended to the event sink before the messages describing it are returned.

use std::collections::BTreeMap;
use std::io;
use std::sync::Arc;
use std::time::Duration;

use log::{info, warn};
use miboard_core::game::autopilot::{
    forfeit_action, reset_seed, restart_game, start_game, system_step, StartError, Started,
};
use miboard_core::game::{Action, GameError, GameSetup, Outcome};
use miboard_core::protocol::{
    request_action, Chat, DiscussMsg, DiscussPass, ErrorPayload, EventApplied, GameOver, Message, PlayPower,
    RollResult, ScoreResult, SeSubmit, StateSync, TaskDrawn, Vote1Result,
};
use miboard_core::protocol::{Empty, MessageCode};
use miboard_core::{Corpus, CorpusSession, GameConfig, GameState, Phase, PlayerId, RoomId};
use thiserror::Error;

use crate::event_log::{EventKind, EventPayload, Lifecycle, SessionEvent, SharedSink};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Timers {
    /// How long a dropped player keeps their seat before being auto-passed.
    pub reconnect_grace: Duration,
    /// How long the room waits on a pending player before acting for them.
    pub inactivity: Duration,
}

impl Default for Timers {
    fn default() -> Self {
        Timers { reconnect_grace: Duration::from_secs(60), inactivity: Duration::from_secs(180) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outbound {
    pub to: PlayerId,
    pub message: Message,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Presence {
    Connected,
    Away {
        since_ms: u64,
    },
    /// Past the reconnect grace; the room plays for them.
    Forfeited,
}

#[derive(Debug, Error)]
pub enum RoomError {
    #[error("cannot start game: {0}")]
    Start(#[from] StartError),
    #[error("event log write failed: {0}")]
    Log(#[from] io::Error),
}

enum CommitError {
    Game(GameError),
    Log(io::Error),
}

impl From<io::Error> for CommitError {
    fn from(e: io::Error) -> Self {
        CommitError::Log(e)
    }
}

pub struct RoomRuntime {
    room_id: RoomId,
    room_seed: u64,
    games_started: u64,
    game_id: u64,
    seq: u64,
    config: GameConfig,
    state: GameState,
    session: CorpusSession,
    corpus: Arc<Corpus>,
    presence: BTreeMap<PlayerId, Presence>,
    timers: Timers,
    sink: SharedSink,
    last_progress_ms: u64,
    phase_entered_ms: u64,
    /// Reader turns in a row lost to the inactivity timer.
    idle_turns: usize,
    outbox: Vec<Outbound>,
}

/// Game ids embed the room id so they are unique across rooms and stable
/// under a fixed server seed.
pub fn game_id(room_id: RoomId, nth: u64) -> u64 {
    (room_id.0 << 20) | nth
}

impl RoomRuntime {
    #[allow(clippy::too_many_arguments)]
    pub fn start(
        room_id: RoomId,
        roster: Vec<PlayerId>,
        config: &GameConfig,
        room_seed: u64,
        corpus: Arc<Corpus>,
        sink: SharedSink,
        timers: Timers,
        now_ms: u64,
    ) -> Result<(Self, Vec<Outbound>), RoomError> {
        let Started { setup, state, session } = start_game(config, roster.clone(), room_seed, &corpus)?;
        let mut room = RoomRuntime {
            room_id,
            room_seed,
            games_started: 0,
            game_id: game_id(room_id, 0),
            seq: 0,
            config: config.clone(),
            state,
            session,
            corpus,
            presence: roster.into_iter().map(|p| (p, Presence::Connected)).collect(),
            timers,
            sink,
            last_progress_ms: now_ms,
            phase_entered_ms: now_ms,
            idle_turns: 0,
            outbox: Vec::new(),
        };
        room.log_created(setup, now_ms)?;
        room.drive(now_ms)?;
        let out = room.flush_with_sync();
        Ok((room, out))
    }

    pub fn room_id(&self) -> RoomId {
        self.room_id
    }

    pub fn game_id(&self) -> u64 {
        self.game_id
    }

    /// Sequence number of the last logged event of the current game.
    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn presence(&self, player: &PlayerId) -> Option<Presence> {
        self.presence.get(player).copied()
    }

    pub fn members(&self) -> impl Iterator<Item = &PlayerId> {
        self.presence.keys()
    }

    pub fn connected_count(&self) -> usize {
        self.presence.values().filter(|p| **p == Presence::Connected).count()
    }

    fn live_count(&self) -> usize {
        self.presence.values().filter(|p| **p != Presence::Forfeited).count()
    }

    /// A request from a seated player.
    pub fn handle(&mut self, player: &PlayerId, message: &Message, now_ms: u64) -> Result<Vec<Outbound>, RoomError> {
        if !self.presence.contains_key(player) {
            return Ok(vec![error_to(player, "notMember", "not seated in this room")]);
        }
        match message {
            Message::Chat(chat) => return self.chat(player, chat, now_ms),
            Message::BeginGame(_) => {
                if !self.state.is_over() {
                    return Ok(vec![error_to(player, "alreadyStarted", "a game is in progress")]);
                }
                self.restart(now_ms)?;
                return Ok(self.flush_with_sync());
            }
            _ => {}
        }
        let Some(action) = request_action(player, message) else {
            let code = message.code();
            return Ok(vec![error_to(player, "unexpectedCode", format!("{code} is not a game request"))]);
        };
        match self.commit(&action, EventKind::for_request(&action), Some(player.clone()), now_ms) {
            Ok(()) => {
                self.idle_turns = 0;
                self.drive(now_ms)?;
                Ok(self.flush_with_sync())
            }
            Err(CommitError::Game(e)) => Ok(vec![error_to(player, e.code(), e)]),
            Err(CommitError::Log(e)) => Err(e.into()),
        }
    }

    fn chat(&mut self, player: &PlayerId, chat: &Chat, now_ms: u64) -> Result<Vec<Outbound>, RoomError> {
        // Room-wide chat during discussion is the discussion itself.
        if self.state.phase() == Phase::Discussion && chat.to.is_none() {
            let request = Message::DiscussMsg(DiscussMsg { player: None, text: chat.text.clone() });
            return self.handle(player, &request, now_ms);
        }
        if !self.state.chat_allowed(player) {
            return Ok(vec![error_to(player, "chatDisabled", "chat is closed while you have an action pending")]);
        }
        let relayed = Message::Chat(Chat { from: Some(player.clone()), to: chat.to.clone(), text: chat.text.clone() });
        let recipients: Vec<PlayerId> = match &chat.to {
            None => self.connected().collect(),
            Some(to) => self.connected().filter(|p| p == player || to.contains(p)).collect(),
        };
        Ok(recipients.into_iter().map(|to| Outbound { to, message: relayed.clone() }).collect())
    }

    pub fn disconnect(&mut self, player: &PlayerId, now_ms: u64) -> Result<Vec<Outbound>, RoomError> {
        if self.presence.get(player) != Some(&Presence::Connected) {
            return Ok(Vec::new());
        }
        self.presence.insert(player.clone(), Presence::Away { since_ms: now_ms });
        self.note(Lifecycle::PlayerDisconnected, player, "connection lost", now_ms)?;
        Ok(Vec::new())
    }

    /// The returned messages include a full resync for the returning player.
    pub fn reconnect(&mut self, player: &PlayerId, now_ms: u64) -> Result<Vec<Outbound>, RoomError> {
        let Some(prev) = self.presence.get(player).copied() else {
            return Ok(vec![error_to(player, "notMember", "not seated in this room")]);
        };
        if prev != Presence::Connected {
            self.presence.insert(player.clone(), Presence::Connected);
            self.note(Lifecycle::PlayerReconnected, player, "reconnected", now_ms)?;
        }
        Ok(vec![self.sync_for(player, &self.state.state_hash())])
    }

    /// Fires due timers: reconnect grace, the discussion limit and turn
    /// inactivity.
    pub fn tick(&mut self, now_ms: u64) -> Result<Vec<Outbound>, RoomError> {
        let before = (self.game_id, self.seq);
        let grace = self.timers.reconnect_grace.as_millis() as u64;
        let expired: Vec<PlayerId> = self
            .presence
            .iter()
            .filter_map(|(p, pres)| match pres {
                Presence::Away { since_ms } if now_ms.saturating_sub(*since_ms) >= grace => Some(p.clone()),
                _ => None,
            })
            .collect();
        for p in &expired {
            self.presence.insert(p.clone(), Presence::Forfeited);
            self.note(Lifecycle::PlayerForfeited, p, "reconnect grace expired", now_ms)?;
        }

        if !self.state.is_over() {
            let in_phase = now_ms.saturating_sub(self.phase_entered_ms);
            let limit = self.state.config().discussion_time_limit_ms;
            let idle = now_ms.saturating_sub(self.last_progress_ms);
            if self.state.phase() == Phase::Discussion && in_phase >= limit {
                let close = Action::CloseDiscussion { elapsed_ms: in_phase };
                self.commit_or_log(&close, EventKind::Lifecycle(Lifecycle::TimerExpired), None, now_ms)?;
            } else if idle >= self.timers.inactivity.as_millis() as u64 {
                for p in self.state.pending_actors() {
                    if let Some(a) = forfeit_action(&self.state, &p) {
                        self.idle_turns += usize::from(a == Action::SkipTurn);
                        self.commit_or_log(&a, EventKind::Lifecycle(Lifecycle::TimerExpired), Some(p), now_ms)?;
                    }
                }
                // A full rotation of idle readers means nobody is playing.
                if self.idle_turns >= self.presence.len() && !self.state.is_over() {
                    info!("room {} game {}: every reader timed out, aborting", self.room_id, self.game_id);
                    self.commit_or_log(&Action::Abort, EventKind::Lifecycle(Lifecycle::GameAborted), None, now_ms)?;
                }
            }
        }

        self.drive(now_ms)?;
        Ok(if before != (self.game_id, self.seq) { self.flush_with_sync() } else { Vec::new() })
    }

    /// Host steps and stand-in moves for forfeited players, until someone
    /// connected has to act.
    fn drive(&mut self, now_ms: u64) -> Result<(), io::Error> {
        loop {
            if self.state.is_over() {
                return Ok(());
            }
            if self.live_count() < miboard_core::lobby::MIN_PLAYERS {
                info!("room {} game {}: too few live players, aborting", self.room_id, self.game_id);
                self.commit_or_log(&Action::Abort, EventKind::Lifecycle(Lifecycle::GameAborted), None, now_ms)?;
                return Ok(());
            }
            if let Some(a) = system_step(&self.state, &mut self.session, &self.corpus) {
                self.commit_or_log(&a, EventKind::for_request(&a), None, now_ms)?;
                continue;
            }
            let stand_in = self
                .state
                .pending_actors()
                .into_iter()
                .filter(|p| self.presence.get(p) == Some(&Presence::Forfeited))
                .find_map(|p| forfeit_action(&self.state, &p).map(|a| (p, a)));
            match stand_in {
                Some((p, a)) => {
                    self.commit_or_log(&a, EventKind::Lifecycle(Lifecycle::PlayerForfeited), Some(p), now_ms)?
                }
                None => return Ok(()),
            }
        }
    }

    /// Host-originated actions are legal by construction; a rejection means
    /// a bug, which is logged rather than taking the room down.
    fn commit_or_log(
        &mut self,
        action: &Action,
        kind: EventKind,
        actor: Option<PlayerId>,
        now_ms: u64,
    ) -> Result<(), io::Error> {
        match self.commit(action, kind, actor, now_ms) {
            Ok(()) => Ok(()),
            Err(CommitError::Log(e)) => Err(e),
            Err(CommitError::Game(e)) => {
                warn!("room {}: host action {} rejected: {e}", self.room_id, action.name());
                Ok(())
            }
        }
    }

    fn restart(&mut self, now_ms: u64) -> Result<(), RoomError> {
        self.games_started += 1;
        self.idle_turns = 0;
        let seed = reset_seed(self.room_seed, self.games_started);
        let Started { setup, state, session } = restart_game(&self.state, self.session.clone(), seed, &self.corpus)?;
        self.state = state;
        self.session = session;
        self.game_id = game_id(self.room_id, self.games_started);
        self.seq = 0;
        self.last_progress_ms = now_ms;
        self.phase_entered_ms = now_ms;
        self.log_created(setup, now_ms)?;
        self.drive(now_ms)?;
        Ok(())
    }

    fn log_created(&mut self, setup: GameSetup, now_ms: u64) -> io::Result<()> {
        self.append(
            EventKind::Lifecycle(Lifecycle::GameCreated),
            None,
            EventPayload::Created { setup: Box::new(setup) },
            self.state.state_hash(),
            now_ms,
        )
    }

    fn note(&mut self, kind: Lifecycle, player: &PlayerId, detail: &str, now_ms: u64) -> io::Result<()> {
        let payload = EventPayload::Note { detail: detail.into() };
        self.append(EventKind::Lifecycle(kind), Some(player.clone()), payload, self.state.state_hash(), now_ms)
    }

    fn append(
        &mut self,
        kind: EventKind,
        actor: Option<PlayerId>,
        payload: EventPayload,
        state_hash: String,
        now_ms: u64,
    ) -> io::Result<()> {
        let event = SessionEvent {
            timestamp_ms: now_ms,
            room_id: self.room_id,
            game_id: self.game_id,
            seq: self.seq + 1,
            kind,
            actor,
            payload,
            resulting_phase: self.state.phase(),
            state_hash,
        };
        self.sink.append(&event)?;
        self.seq += 1;
        Ok(())
    }

    /// Applies, logs, then queues the result messages. Nothing changes if the
    /// action is illegal or the log write fails.
    fn commit(
        &mut self,
        action: &Action,
        kind: EventKind,
        actor: Option<PlayerId>,
        now_ms: u64,
    ) -> Result<(), CommitError> {
        let mut next = self.state.clone();
        let outcome = next.apply(action).map_err(CommitError::Game)?;
        let prev = std::mem::replace(&mut self.state, next);
        let logged =
            self.append(kind, actor, EventPayload::Action { action: action.clone() }, self.state.state_hash(), now_ms);
        if let Err(e) = logged {
            self.state = prev;
            return Err(e.into());
        }
        self.last_progress_ms = now_ms;
        if self.state.phase() != prev.phase() {
            self.phase_entered_ms = now_ms;
        }
        self.queue_results(&prev, action, &outcome);
        Ok(())
    }

    fn connected(&self) -> impl Iterator<Item = PlayerId> + '_ {
        self.presence.iter().filter(|(_, p)| **p == Presence::Connected).map(|(id, _)| id.clone())
    }

    fn broadcast(&mut self, message: Message) {
        let to: Vec<PlayerId> = self.connected().collect();
        self.outbox.extend(to.into_iter().map(|to| Outbound { to, message: message.clone() }));
    }

    fn queue_results(&mut self, prev: &GameState, action: &Action, outcome: &Outcome) {
        let reader = prev.reader().clone();
        let round = self.state.round();
        match outcome {
            Outcome::TaskDrawn(task) | Outcome::Redrawn(task) => {
                let round = round.expect("task drawn");
                for to in self.connected().collect::<Vec<_>>() {
                    let own = to == reader;
                    let message = Message::TaskDrawn(TaskDrawn {
                        reader: reader.clone(),
                        turn: round.turn,
                        target_sentence: round.target_sentence,
                        strategy: own.then_some(task.specified_strategy),
                        point_value: own.then_some(task.point_value),
                    });
                    self.outbox.push(Outbound { to, message });
                }
            }
            Outcome::SelfExplanationAccepted => {
                let text = round.and_then(|r| r.self_explanation.clone()).unwrap_or_default();
                self.broadcast(Message::SeSubmit(SeSubmit { player: Some(reader), text }));
            }
            Outcome::Recorded { .. } => match action {
                Action::PostDiscussion { player, text } => {
                    self.broadcast(Message::DiscussMsg(DiscussMsg { player: Some(player.clone()), text: text.clone() }))
                }
                Action::PassDiscussion { player } => {
                    self.broadcast(Message::DiscussPass(DiscussPass { player: Some(player.clone()) }))
                }
                _ => {}
            },
            Outcome::FirstTally(tally) => {
                let round = round.expect("tallied round");
                let message = Message::Vote1Result(Vote1Result {
                    unanimous: tally.unanimous,
                    specified: round.task.specified_strategy,
                    point_value: round.task.point_value,
                    votes: round.first_votes.clone(),
                    deltas: tally.score.as_ref().map(|s| s.deltas.clone()).unwrap_or_default(),
                });
                self.broadcast(message);
            }
            Outcome::Scored(score) => {
                let message = Message::ScoreResult(ScoreResult {
                    accepted: score.accepted.clone(),
                    deltas: score.deltas.clone(),
                    totals: self.totals(),
                    votes: round.map(|r| r.second_votes.clone()).unwrap_or_default(),
                });
                self.broadcast(message);
            }
            Outcome::PowerPlayed(card) => self.broadcast(Message::PlayPower(PlayPower { card: card.clone() })),
            Outcome::PowerSkipped => self.broadcast(Message::SkipPower(Empty {})),
            Outcome::Moved(mv) => {
                self.broadcast(Message::RollResult(RollResult {
                    reader: reader.clone(),
                    dice: mv.roll.dice.clone(),
                    total: mv.roll.total,
                    landed: mv.landed,
                }));
                for to in self.connected().collect::<Vec<_>>() {
                    let message = Message::EventApplied(EventApplied {
                        reader: reader.clone(),
                        card: mv.event,
                        position: mv.position,
                        power_drawn: mv.power_drawn.filter(|_| to == reader),
                    });
                    self.outbox.push(Outbound { to, message });
                }
            }
            Outcome::TextReplaced | Outcome::DiscussionClosed | Outcome::TurnSkipped | Outcome::Aborted => {}
        }
        if self.state.is_over() {
            let message = Message::GameOver(GameOver {
                winner: self.state.winner().cloned(),
                scores: self.totals(),
                aborted: self.state.is_aborted(),
                state_hash: self.state.state_hash(),
            });
            self.broadcast(message);
        }
    }

    fn totals(&self) -> BTreeMap<PlayerId, u32> {
        self.state.players().iter().map(|p| (p.id.clone(), p.score)).collect()
    }

    fn sync_for(&self, player: &PlayerId, state_hash: &str) -> Outbound {
        Outbound {
            to: player.clone(),
            message: Message::StateSync(StateSync {
                room_id: self.room_id,
                game_id: self.game_id,
                event_seq: self.seq,
                state_hash: state_hash.to_owned(),
                view: Box::new(self.state.view_for(player)),
            }),
        }
    }

    /// Queued results followed by one state sync per connected player.
    fn flush_with_sync(&mut self) -> Vec<Outbound> {
        let mut out = std::mem::take(&mut self.outbox);
        let hash = self.state.state_hash();
        for p in self.connected().collect::<Vec<_>>() {
            out.push(self.sync_for(&p, &hash));
        }
        out
    }
}

pub fn error_to(player: &PlayerId, kind: &str, message: impl std::fmt::Display) -> Outbound {
    Outbound { to: player.clone(), message: Message::Error(ErrorPayload::new(kind, message)) }
}

/// Message codes a seated player may send to their room.
pub fn is_room_request(code: MessageCode) -> bool {
    use MessageCode as C;
    matches!(
        code,
        C::BeginGame
            | C::Redraw
            | C::SeSubmit
            | C::Guess
            | C::DiscussMsg
            | C::DiscussPass
            | C::Vote2
            | C::PlayPower
            | C::SkipPower
            | C::Roll
            | C::Chat
    )
}

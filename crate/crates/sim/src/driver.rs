//! Plays one game with bots, either directly against a [`GameState`] or
//! through a server [`RoomRuntime`].

use std::sync::Arc;

use miboard_core::game::autopilot::{forfeit_action, start_game, system_step, StartError, Started};
use miboard_core::protocol::{request_action, Message, MessageCode};
use miboard_core::seed::{derive_seed, room_seed, BOT_STREAM};
use miboard_core::{Action, Corpus, GameConfig, GameState, Outcome, PlayerId, RoomId};
use miboard_server::{EventSink, RoomError, RoomRuntime, Timers};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::invariants::{Checker, Violation};
use crate::policy::{Bot, BotPolicy};
use crate::report::GameReport;

/// Default per-game action budget; a game that needs more is reported as a
/// violation and cut off.
pub const DEFAULT_MAX_ACTIONS: u64 = 50_000;

/// Player ids used for simulated game `index`.
pub fn player_ids(index: usize, n: usize) -> Vec<PlayerId> {
    (0..n).map(|seat| PlayerId::new(format!("g{index}-p{seat}"))).collect()
}

/// Room seed for simulated game `index`: the seed a server started with base
/// seed `base` gives its `index + 1`th room.
pub fn game_seed(base: u64, index: usize) -> u64 {
    room_seed(base, index as u64 + 1)
}

pub fn bot_rng(room_seed: u64, seat: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(room_seed, BOT_STREAM), seat as u64))
}

pub fn make_bots(policy: &BotPolicy, room_seed: u64, n: usize) -> Vec<Bot> {
    (0..n).map(|seat| Bot::new(policy.clone(), seat, bot_rng(room_seed, seat))).collect()
}

#[derive(Clone, Debug)]
pub struct GameSpec {
    pub index: usize,
    pub room_seed: u64,
    pub players: Vec<PlayerId>,
    pub config: GameConfig,
    pub policy: BotPolicy,
    pub max_actions: u64,
}

impl GameSpec {
    pub fn new(index: usize, base_seed: u64, n: usize, config: &GameConfig, policy: &BotPolicy) -> Self {
        GameSpec {
            index,
            room_seed: game_seed(base_seed, index),
            players: player_ids(index, n),
            config: config.clone(),
            policy: policy.clone(),
            max_actions: DEFAULT_MAX_ACTIONS,
        }
    }
}

/// Plays a game in-process, checking invariants on every transition.
pub fn play_game(corpus: &Corpus, spec: &GameSpec) -> Result<(GameReport, GameState), StartError> {
    let Started { mut state, mut session, .. } =
        start_game(&spec.config, spec.players.clone(), spec.room_seed, corpus)?;
    let mut bots = make_bots(&spec.policy, spec.room_seed, spec.players.len());
    let mut report = GameReport {
        index: spec.index,
        room_seed: spec.room_seed,
        players: spec.players.clone(),
        ..GameReport::default()
    };
    *report.phase_visits.entry(state.phase()).or_default() += 1;

    while !state.is_over() {
        if report.actions >= spec.max_actions {
            report.violations.push(Violation {
                action: report.actions,
                rule: "actionCap".into(),
                detail: format!("no result after {} actions", spec.max_actions),
            });
            break;
        }
        let before = state.clone();
        let (action, outcome) = match system_step(&state, &mut session, corpus) {
            Some(a) => {
                let out = state.apply(&a);
                (a, out)
            }
            None => {
                let Some(player) = state.pending_actors().into_iter().next() else {
                    report.violations.push(Violation {
                        action: report.actions,
                        rule: "stalled".into(),
                        detail: format!("nobody to act during {}", state.phase()),
                    });
                    break;
                };
                let seat = state.seat_of(&player).expect("pending players are seated");
                let message = bots[seat].decide(&state.view_for(&player));
                match bot_step(&mut state, &player, &message) {
                    Some(done) => done,
                    None => {
                        report.rejected += 1;
                        let a = forfeit_action(&state, &player).expect("pending players can forfeit");
                        let out = state.apply(&a);
                        (a, out)
                    }
                }
            }
        };
        let outcome = match outcome {
            Ok(o) => o,
            Err(e) => {
                report.violations.push(Violation {
                    action: report.actions,
                    rule: "hostRejected".into(),
                    detail: format!("{}: {e}", action.name()),
                });
                break;
            }
        };
        Checker::new(report.actions, &mut report.violations).transition(&before, &action, &outcome, &state);
        record(&mut report, &before, &action, &outcome, &state);
        report.actions += 1;
    }

    finish(&mut report, &state);
    Ok((report, state))
}

/// Applies a bot's request, or returns `None` (leaving the state untouched)
/// when it is not a game request or the engine refuses it.
fn bot_step(
    state: &mut GameState,
    player: &PlayerId,
    message: &Message,
) -> Option<(Action, Result<Outcome, miboard_core::GameError>)> {
    let action = request_action(player, message)?;
    match state.apply(&action) {
        Ok(out) => Some((action, Ok(out))),
        Err(_) => None,
    }
}

fn record(report: &mut GameReport, before: &GameState, action: &Action, outcome: &Outcome, after: &GameState) {
    *report.phase_visits.entry(after.phase()).or_default() += u64::from(before.phase() != after.phase());
    *report.transitions.entry(format!("{}->{}", before.phase(), after.phase())).or_default() += 1;
    match outcome {
        Outcome::FirstTally(t) if t.unanimous => report.unanimous_rounds += 1,
        Outcome::FirstTally(_) => report.discussion_rounds += 1,
        _ => {}
    }
    let round_closed = matches!(outcome, Outcome::Scored(_) | Outcome::TurnSkipped)
        || matches!(outcome, Outcome::FirstTally(t) if t.unanimous);
    if round_closed {
        report.trajectory.push(after.players().iter().map(|p| p.score).collect());
    }
    let most = after.players().iter().map(|p| p.discussion_messages_used).max().unwrap_or(0);
    report.max_discussion_messages = report.max_discussion_messages.max(most);
    if matches!(action, Action::SkipTurn) {
        report.skipped_rounds += 1;
    }
}

fn finish(report: &mut GameReport, state: &GameState) {
    report.winner = state.winner().cloned();
    report.aborted = state.is_aborted();
    report.rounds = state.turn();
    report.scores = state.players().iter().map(|p| (p.id.clone(), p.score)).collect();
    report.final_hash = state.state_hash();
}

/// Result of a game hosted by a [`RoomRuntime`].
#[derive(Clone, Debug)]
pub struct RoomGame {
    pub room_id: RoomId,
    pub game_id: u64,
    pub state: GameState,
    /// Error frames the room sent back to bots.
    pub rejected: u64,
}

/// Plays a game through the server's room runtime with a 1 s simulated clock
/// per request, so every transition lands in `sink` exactly as it would live.
pub fn play_in_room(
    corpus: Arc<Corpus>,
    spec: &GameSpec,
    sink: Arc<dyn EventSink>,
    timers: Timers,
) -> Result<RoomGame, RoomError> {
    let room_id = RoomId(spec.index as u64 + 1);
    let mut now = 0;
    let (mut room, _) =
        RoomRuntime::start(room_id, spec.players.clone(), &spec.config, spec.room_seed, corpus, sink, timers, now)?;
    let mut bots = make_bots(&spec.policy, spec.room_seed, spec.players.len());
    let mut rejected = 0;
    let mut steps = 0;
    while !room.state().is_over() && steps < spec.max_actions {
        steps += 1;
        now += 1000;
        let Some(player) = room.state().pending_actors().into_iter().next() else {
            break;
        };
        let seat = room.state().seat_of(&player).expect("pending players are seated");
        let message = bots[seat].decide(&room.state().view_for(&player));
        let out = room.handle(&player, &message, now)?;
        if out.iter().any(|o| o.to == player && o.message.code() == MessageCode::Error) {
            rejected += 1;
            now += timers.inactivity.as_millis() as u64;
            room.tick(now)?;
        }
    }
    Ok(RoomGame { room_id, game_id: room.game_id(), state: room.state().clone(), rejected })
}

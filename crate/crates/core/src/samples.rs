//! Random, schema-valid messages for codec tests.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::cards::{EventCard, PowerKind, PowerPlay};
use crate::config::GameConfig;
use crate::corpus::{TextId, TextRecord};
use crate::game::{Argument, GameState, Span};
use crate::lobby::RoomId;
use crate::protocol::*;
use crate::strategy::Strategy;
use crate::PlayerId;

const ALPHABET: &[char] = &['a', 'Z', '0', ' ', '"', '\\', '{', '}', ':', ',', '\n', 'é', '中', '🙂', '\u{0}'];

fn text(rng: &mut impl Rng, max: usize) -> String {
    let n = rng.gen_range(0..=max);
    (0..n).map(|_| *ALPHABET.choose(rng).unwrap()).collect()
}

fn player(rng: &mut impl Rng) -> PlayerId {
    PlayerId::new(format!("p{}", rng.gen_range(0..6)))
}

fn strategy(rng: &mut impl Rng) -> Strategy {
    *Strategy::ALL.choose(rng).unwrap()
}

fn argument(rng: &mut impl Rng) -> Argument {
    let span = rng.gen_bool(0.5).then(|| {
        let start = rng.gen_range(0..50);
        Span { start, end: start + rng.gen_range(0..50) }
    });
    Argument::new(strategy(rng), text(rng, 12), span)
}

fn players<R: Rng, V>(rng: &mut R, mut f: impl FnMut(&mut R) -> V) -> BTreeMap<PlayerId, V> {
    (0..rng.gen_range(0..4)).map(|_| (player(rng), f(rng))).collect()
}

fn power_play(rng: &mut impl Rng) -> PowerPlay {
    match rng.gen_range(0..3) {
        0 => PowerPlay::ExtraTurn,
        1 => PowerPlay::DoubleDice,
        _ => PowerPlay::FreezePlayer { target: player(rng) },
    }
}

fn view(rng: &mut impl Rng) -> crate::game::PlayerView {
    let ids: Vec<PlayerId> = (0..3).map(|i| PlayerId::new(format!("p{i}"))).collect();
    let record = TextRecord {
        id: TextId::new(text(rng, 8)),
        title: text(rng, 16),
        sentences: vec![text(rng, 30), text(rng, 30)],
        targets: vec![1, 2],
    };
    let config = GameConfig::default().with_players(3).with_seed(rng.gen());
    let mut g = GameState::new_game(config, ids.clone(), record).expect("valid sample game");
    if rng.gen_bool(0.5) {
        g.draw_task().expect("fresh game draws");
    }
    g.view_for(ids.choose(rng).unwrap())
}

/// A random message with the given code.
pub fn sample_message(code: MessageCode, rng: &mut impl Rng) -> Message {
    match code {
        MessageCode::JoinZone => Message::JoinZone(JoinZone { zone: text(rng, 10), player: player(rng) }),
        MessageCode::RoomAssigned => Message::RoomAssigned(RoomAssigned {
            room_id: RoomId(rng.gen()),
            zone: text(rng, 10),
            members: (0..rng.gen_range(0..5)).map(|_| player(rng)).collect(),
            started: rng.gen(),
        }),
        MessageCode::BeginGame => Message::BeginGame(Empty {}),
        MessageCode::StateSync => Message::StateSync(StateSync {
            room_id: RoomId(rng.gen()),
            game_id: rng.gen(),
            event_seq: rng.gen(),
            state_hash: text(rng, 64),
            view: Box::new(view(rng)),
        }),
        MessageCode::TaskDrawn => Message::TaskDrawn(TaskDrawn {
            reader: player(rng),
            turn: rng.gen(),
            target_sentence: rng.gen_range(1..100),
            strategy: rng.gen_bool(0.5).then(|| strategy(rng)),
            point_value: rng.gen_bool(0.5).then(|| rng.gen_range(0..40)),
        }),
        MessageCode::Redraw => {
            Message::Redraw(Redraw { kind: if rng.gen() { RedrawKind::Strategy } else { RedrawKind::Points } })
        }
        MessageCode::SeSubmit => {
            Message::SeSubmit(SeSubmit { player: rng.gen_bool(0.5).then(|| player(rng)), text: text(rng, 200) })
        }
        MessageCode::Guess => Message::Guess(Guess { argument: argument(rng) }),
        MessageCode::Vote1Result => Message::Vote1Result(Vote1Result {
            unanimous: rng.gen(),
            specified: strategy(rng),
            point_value: rng.gen_range(0..40),
            votes: players(rng, |r| argument(r)),
            deltas: players(rng, |r| r.gen_range(0..30)),
        }),
        MessageCode::DiscussMsg => {
            Message::DiscussMsg(DiscussMsg { player: rng.gen_bool(0.5).then(|| player(rng)), text: text(rng, 200) })
        }
        MessageCode::DiscussPass => {
            Message::DiscussPass(DiscussPass { player: rng.gen_bool(0.5).then(|| player(rng)) })
        }
        MessageCode::Vote2 => {
            Message::Vote2(Vote2 { arguments: (0..rng.gen_range(0..4)).map(|_| argument(rng)).collect() })
        }
        MessageCode::ScoreResult => Message::ScoreResult(ScoreResult {
            accepted: (0..rng.gen_range(0..3)).map(|_| strategy(rng)).collect(),
            deltas: players(rng, |r| r.gen_range(0..30)),
            totals: players(rng, |r| r.gen_range(0..130)),
            votes: players(rng, |r| (0..r.gen_range(1..3)).map(|_| argument(r)).collect()),
        }),
        MessageCode::PlayPower => Message::PlayPower(PlayPower { card: power_play(rng) }),
        MessageCode::SkipPower => Message::SkipPower(Empty {}),
        MessageCode::Roll => Message::Roll(Empty {}),
        MessageCode::RollResult => {
            let dice: Vec<u32> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(1..=6)).collect();
            Message::RollResult(RollResult {
                reader: player(rng),
                total: dice.iter().sum(),
                dice,
                landed: rng.gen_range(0..40),
            })
        }
        MessageCode::EventApplied => Message::EventApplied(EventApplied {
            reader: player(rng),
            card: rng.gen_bool(0.8).then(|| *EventCard::ALL.choose(rng).unwrap()),
            position: rng.gen_range(0..40),
            power_drawn: rng
                .gen_bool(0.3)
                .then(|| *[PowerKind::ExtraTurn, PowerKind::DoubleDice, PowerKind::FreezePlayer].choose(rng).unwrap()),
        }),
        MessageCode::GameOver => Message::GameOver(GameOver {
            winner: rng.gen_bool(0.7).then(|| player(rng)),
            scores: players(rng, |r| r.gen_range(0..130)),
            aborted: rng.gen(),
            state_hash: text(rng, 64),
        }),
        MessageCode::Chat => Message::Chat(Chat {
            from: rng.gen_bool(0.5).then(|| player(rng)),
            to: rng.gen_bool(0.3).then(|| (0..rng.gen_range(1..3)).map(|_| player(rng)).collect()),
            text: text(rng, 300),
        }),
        MessageCode::Error => Message::Error(ErrorPayload::new(text(rng, 12), text(rng, 40))),
        MessageCode::Ping => Message::Ping(Ping { nonce: rng.gen() }),
        MessageCode::Pong => Message::Pong(Ping { nonce: rng.gen() }),
    }
}

use std::collections::{BTreeMap, BTreeSet};

use miboard_core::game::scoring::{accepted_strategies, score_votes, OFF_TASK_BONUS};
use miboard_core::protocol::{decode, encode, request_action, Chat, CodecError, Frame, Message, MessageCode};
use miboard_core::samples::sample_message;
use miboard_core::{reveal_window, PlayerId, Strategy, TextId, TextRecord};
use proptest::prelude::*;
use proptest::strategy::Strategy as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn strategy_set() -> impl proptest::strategy::Strategy<Value = BTreeSet<Strategy>> {
    proptest::collection::btree_set((0usize..5).prop_map(|i| Strategy::ALL[i]), 0..=2)
}

proptest! {
    #[test]
    fn reveal_windows_grow(mut targets in proptest::collection::btree_set(1usize..60, 1..12)) {
        let targets: Vec<usize> = std::mem::take(&mut targets).into_iter().collect();
        let n = *targets.last().unwrap();
        let text = TextRecord {
            id: TextId::new("t"),
            title: "t".into(),
            sentences: (0..n).map(|i| format!("s{i}")).collect(),
            targets: targets.clone(),
        };
        text.validate().unwrap();
        let mut prev_end = 0;
        for turn in 1..=targets.len() {
            let w = reveal_window(&text, turn).unwrap();
            prop_assert_eq!(*w.start(), 1);
            prop_assert_eq!(*w.end(), targets[turn - 1]);
            prop_assert!(*w.end() > prev_end);
            prev_end = *w.end();
        }
        prop_assert!(reveal_window(&text, 0).is_err());
        prop_assert!(reveal_window(&text, targets.len() + 1).is_err());
    }

    /// Compares the engine's scoring with a direct per-player recount.
    #[test]
    fn scoring_matches_recount(
        n in 3usize..=4,
        sets in proptest::collection::vec(strategy_set(), 4),
        specified_idx in 0usize..5,
        point in prop::sample::select(vec![12u32, 14, 16, 18, 20]),
    ) {
        let specified = Strategy::ALL[specified_idx];
        let players: Vec<PlayerId> = (0..n).map(|i| PlayerId::new(format!("p{i}"))).collect();
        let votes: BTreeMap<PlayerId, BTreeSet<Strategy>> =
            players.iter().cloned().zip(sets.into_iter().take(n)).filter(|(_, s)| !s.is_empty()).collect();
        let out = score_votes(&votes, &players, &players[0], specified, point);

        for s in Strategy::ALL {
            let count = votes.values().filter(|set| set.contains(&s)).count();
            prop_assert_eq!(out.accepted.contains(&s), count * 2 > n);
        }
        prop_assert_eq!(
            &out.accepted,
            &accepted_strategies(votes.values(), n)
        );
        for (seat, p) in players.iter().enumerate() {
            let mine = votes.get(p).cloned().unwrap_or_default();
            let mut expect = 0;
            for s in &out.accepted {
                if *s == specified {
                    if seat == 0 {
                        expect += point;
                    } else if mine.contains(s) {
                        expect += point / 2;
                    }
                } else if mine.contains(s) {
                    expect += OFF_TASK_BONUS;
                }
            }
            prop_assert_eq!(out.deltas.get(p).copied().unwrap_or(0), expect, "seat {}", seat);
        }
    }

    #[test]
    fn every_message_round_trips(code_idx in 0usize..MessageCode::ALL.len(), seed in any::<u64>(), seq in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = Frame::new(seq, sample_message(MessageCode::ALL[code_idx], &mut rng));
        let wire = encode(&frame).unwrap();
        prop_assert_eq!(decode(wire.as_bytes()).unwrap(), frame);
    }

    #[test]
    fn decode_is_total(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
        let _ = decode(&bytes);
    }

    #[test]
    fn mutated_frames_never_panic(seed in any::<u64>(), flips in proptest::collection::vec((any::<usize>(), any::<u8>()), 1..8)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let code = MessageCode::ALL[(seed as usize) % MessageCode::ALL.len()];
        let mut wire = encode(&Frame::new(1, sample_message(code, &mut rng))).unwrap().into_bytes();
        for (at, byte) in flips {
            let i = at % wire.len();
            wire[i] = byte;
        }
        match decode(&wire) {
            Ok(_) | Err(CodecError::Malformed(_) | CodecError::UnknownCode(_) | CodecError::SchemaViolation { .. }
                | CodecError::VersionMismatch(_) | CodecError::Oversize(_)) => {}
        }
    }

    /// Chat text that spells out a game command stays chat.
    #[test]
    fn chat_cannot_carry_commands(code_idx in 0usize..MessageCode::ALL.len(), seed in any::<u64>(), prefix in ".{0,8}") {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inner = encode(&Frame::new(2, sample_message(MessageCode::ALL[code_idx], &mut rng))).unwrap();
        let text = format!("{prefix}{inner}");
        let frame = Frame::new(1, Message::Chat(Chat { from: None, to: None, text: text.clone() }));
        let decoded = decode(encode(&frame).unwrap().as_bytes()).unwrap();
        prop_assert_eq!(decoded.message.code(), MessageCode::Chat);
        prop_assert_eq!(request_action(&PlayerId::new("p"), &decoded.message), None);
        match decoded.message {
            Message::Chat(c) => prop_assert_eq!(c.text, text),
            _ => unreachable!(),
        }
    }
}

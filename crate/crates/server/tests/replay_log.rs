use std::fs;
use std::io::BufReader;
use std::sync::Arc;

use miboard_core::protocol::{Empty, Message, SeSubmit};
use miboard_core::{Corpus, GameConfig, PlayerId, RoomId, TextId, TextRecord};
use miboard_server::export::{export_csv, COLUMNS};
use miboard_server::{replay, replay_str, FileLog, MemoryLog, ReplayError, RoomRuntime, SessionEvent, Timers};

fn corpus() -> Arc<Corpus> {
    Arc::new(
        Corpus::from_records(vec![TextRecord {
            id: TextId::new("only"),
            title: "Only".into(),
            sentences: vec!["One.".into(), "Two.".into(), "Three.".into()],
            targets: vec![1, 3],
        }])
        .unwrap(),
    )
}

fn roster() -> Vec<PlayerId> {
    ["a", "b", "c"].iter().map(|s| PlayerId::new(*s)).collect()
}

/// A short game prefix logged to memory.
fn sample_log() -> (Vec<SessionEvent>, String) {
    let log = Arc::new(MemoryLog::new());
    let (mut room, _) = RoomRuntime::start(
        RoomId(3),
        roster(),
        &GameConfig::default(),
        11,
        corpus(),
        log.clone(),
        Timers::default(),
        0,
    )
    .unwrap();
    let reader = room.state().reader().clone();
    room.handle(&reader, &Message::SeSubmit(SeSubmit { player: None, text: "because".into() }), 5).unwrap();
    room.disconnect(&PlayerId::new("c"), 6).unwrap();
    (log.events(), log.to_jsonl())
}

#[test]
fn empty_log_replays_to_nothing() {
    assert!(replay_str("").unwrap().is_empty());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.jsonl");
    fs::write(&path, "").unwrap();
    assert!(replay(&path).unwrap().is_empty());
}

#[test]
fn gap_is_detected() {
    let (_, jsonl) = sample_log();
    let lines: Vec<&str> = jsonl.lines().collect();
    let gapped: String = lines.iter().enumerate().filter(|(i, _)| *i != 2).map(|(_, l)| format!("{l}\n")).collect();
    match replay_str(&gapped).unwrap_err() {
        ReplayError::GapDetected { expected, found, .. } => assert_eq!((expected, found), (3, 4)),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn corrupt_line_reports_offset() {
    let (_, jsonl) = sample_log();
    let first_len = jsonl.lines().next().unwrap().len() + 1;
    let broken = jsonl.replacen("\n{", "\n{garbage", 1);
    match replay_str(&broken).unwrap_err() {
        ReplayError::CorruptLine { line, offset, .. } => assert_eq!((line, offset), (2, first_len)),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn tampered_event_diverges() {
    let (events, _) = sample_log();
    let mut tampered = events.clone();
    tampered[1].state_hash = "0".repeat(64);
    let jsonl: String = tampered.iter().map(|e| serde_json::to_string(e).unwrap() + "\n").collect();
    assert!(matches!(replay_str(&jsonl), Err(ReplayError::Divergence { seq: 2, .. })));
}

#[test]
fn missing_create_is_rejected() {
    let (events, _) = sample_log();
    let mut shifted = events[1..].to_vec();
    for e in &mut shifted {
        e.seq -= 1;
    }
    let jsonl: String = shifted.iter().map(|e| serde_json::to_string(e).unwrap() + "\n").collect();
    assert!(matches!(replay_str(&jsonl), Err(ReplayError::MissingCreate { .. })));
}

#[test]
fn file_log_round_trips_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    let sink = Arc::new(FileLog::open(&path).unwrap());
    let (mut room, _) =
        RoomRuntime::start(RoomId(1), roster(), &GameConfig::default(), 5, corpus(), sink, Timers::default(), 0)
            .unwrap();
    room.handle(&PlayerId::new("a"), &Message::BeginGame(Empty {}), 1).unwrap();
    let games = replay(&path).unwrap();
    assert_eq!(games.len(), 1);
    assert_eq!(games.values().next().unwrap(), room.state());

    let mut csv = Vec::new();
    let rows = export_csv(BufReader::new(fs::File::open(&path).unwrap()), &mut csv).unwrap();
    assert_eq!(rows as u64, room.seq());
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with(&COLUMNS.join(",")));
    assert!(text.contains("GameCreated"));
    assert!(text.contains(",DrawTask,"));
}

use std::fs;

use miboard_core::corpus::{CorpusError, RecordError};
use miboard_core::{Corpus, CorpusSession, TextId};
use tempfile::tempdir;

const GOOD: &str = r#"{"id":"water","title":"Water","sentences":["One.","Two.","Three."],"targets":[2,3]}"#;

#[test]
fn loads_directory_of_json_and_jsonl() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("a.json"), GOOD).unwrap();
    let lines = [
        r#"{"id":"x","title":"X","sentences":["a","b"],"targets":[1]}"#,
        "",
        r#"{"id":"y","title":"Y","sentences":["a","b"],"targets":[1,2]}"#,
    ];
    fs::write(dir.path().join("b.jsonl"), lines.join("\n")).unwrap();
    fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let corpus = Corpus::load(dir.path()).unwrap();
    assert_eq!(corpus.len(), 3);
    assert_eq!(corpus.get(&TextId::new("y")).unwrap().targets, vec![1, 2]);
}

#[test]
fn zero_target_is_rejected() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), GOOD.replace("[2,3]", "[0,2]")).unwrap();
    match Corpus::load(dir.path()).unwrap_err() {
        CorpusError::Invalid { id, source, .. } => {
            assert_eq!(id, TextId::new("water"));
            assert_eq!(source, RecordError::TargetOutOfRange { target: 0, len: 3 });
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn duplicate_id_across_files() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("a.json"), GOOD).unwrap();
    fs::write(dir.path().join("b.json"), GOOD).unwrap();
    let err = Corpus::load(dir.path()).unwrap_err();
    assert!(matches!(err, CorpusError::DuplicateId { ref id, .. } if id.as_str() == "water"), "{err}");
}

#[test]
fn malformed_line_is_located() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    fs::write(&path, format!("{GOOD}\n{{\"id\": \"broken\",\n")).unwrap();
    match Corpus::load(&path).unwrap_err() {
        CorpusError::Malformed { line, .. } => assert_eq!(line, 2),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("a.json"), GOOD.replace("\"title\"", "\"extra\":1,\"title\"")).unwrap();
    assert!(matches!(Corpus::load(dir.path()), Err(CorpusError::Malformed { .. })));
}

#[test]
fn empty_directory_is_an_error() {
    let dir = tempdir().unwrap();
    assert!(matches!(Corpus::load(dir.path()), Err(CorpusError::Empty)));
    assert!(matches!(Corpus::load(dir.path().join("missing")), Err(CorpusError::Io { .. })));
}

#[test]
fn session_uses_every_text_before_repeating() {
    let dir = tempdir().unwrap();
    for i in 0..5 {
        fs::write(dir.path().join(format!("{i}.json")), GOOD.replace("water", &format!("t{i}"))).unwrap();
    }
    let corpus = Corpus::load(dir.path()).unwrap();
    let mut session = CorpusSession::new(&corpus, 99);
    let mut seen: Vec<_> = (0..5).map(|_| session.select_text(&corpus).unwrap().id.clone()).collect();
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), 5);
    assert!(session.select_text(&corpus).is_ok());
}

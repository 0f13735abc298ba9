use std::sync::Arc;
use std::time::Duration;

use miboard_core::protocol::{Chat, DiscussMsg, Empty, Guess, Message, SeSubmit, Vote2};
use miboard_core::{Argument, Corpus, GameConfig, Phase, PlayerId, RoomId, Strategy, TextId, TextRecord};
use miboard_server::event_log::EventKind;
use miboard_server::{replay_str, Lifecycle, MemoryLog, Outbound, Presence, RoomRuntime, Timers};

const SEC: u64 = 1000;

fn corpus() -> Arc<Corpus> {
    let text = |id: &str| TextRecord {
        id: TextId::new(id),
        title: id.to_uppercase(),
        sentences: (1..=6).map(|i| format!("{id} sentence {i}.")).collect(),
        targets: vec![2, 4, 6],
    };
    Arc::new(Corpus::from_records(vec![text("alpha"), text("beta")]).unwrap())
}

fn p(s: &str) -> PlayerId {
    PlayerId::new(s)
}

struct Fixture {
    room: RoomRuntime,
    log: Arc<MemoryLog>,
    now: u64,
}

impl Fixture {
    fn new(n: usize) -> (Self, Vec<Outbound>) {
        Self::with_config(n, GameConfig::default())
    }

    fn with_config(n: usize, config: GameConfig) -> (Self, Vec<Outbound>) {
        let log = Arc::new(MemoryLog::new());
        let roster = ["R", "G1", "G2", "G3"][..n].iter().map(|s| p(s)).collect();
        let (room, out) =
            RoomRuntime::start(RoomId(1), roster, &config, 7, corpus(), log.clone(), Timers::default(), 0).unwrap();
        (Fixture { room, log, now: 0 }, out)
    }

    fn send(&mut self, who: &str, m: Message) -> Vec<Outbound> {
        self.now += 10;
        self.room.handle(&p(who), &m, self.now).unwrap()
    }

    fn advance(&mut self, ms: u64) -> Vec<Outbound> {
        self.now += ms;
        self.room.tick(self.now).unwrap()
    }

    fn phase(&self) -> Phase {
        self.room.state().phase()
    }

    fn reader(&self) -> String {
        self.room.state().reader().to_string()
    }

    fn specified(&self) -> Strategy {
        self.room.state().round().unwrap().task.specified_strategy
    }

    fn kinds(&self) -> Vec<EventKind> {
        self.log.events().iter().map(|e| e.kind).collect()
    }

    fn guessers(&self) -> Vec<String> {
        let reader = self.reader();
        self.room.state().players().iter().map(|p| p.id.to_string()).filter(|id| *id != reader).collect()
    }

    fn se(&mut self) -> Vec<Outbound> {
        let r = self.reader();
        self.send(&r, Message::SeSubmit(SeSubmit { player: None, text: "In my own words".into() }))
    }
}

fn errors(out: &[Outbound]) -> Vec<String> {
    out.iter()
        .filter_map(|o| match &o.message {
            Message::Error(e) => Some(e.kind.clone()),
            _ => None,
        })
        .collect()
}

fn guess(s: Strategy) -> Message {
    Message::Guess(Guess { argument: Argument::other(s) })
}

fn other_than(s: Strategy) -> Strategy {
    *Strategy::ALL.iter().find(|x| **x != s).unwrap()
}

#[test]
fn start_logs_creation_and_draws_task() {
    let (f, out) = Fixture::new(3);
    assert_eq!(f.phase(), Phase::ReaderComposing);
    let kinds = f.kinds();
    assert_eq!(kinds[0], EventKind::Lifecycle(Lifecycle::GameCreated));
    assert!(kinds.contains(&EventKind::Code(miboard_core::protocol::MessageCode::TaskDrawn)));
    // Only the reader learns the task.
    for o in &out {
        if let Message::TaskDrawn(t) = &o.message {
            assert_eq!(t.strategy.is_some(), o.to == p("R"));
        }
    }
    assert_eq!(out.iter().filter(|o| matches!(o.message, Message::StateSync(_))).count(), 3);
}

#[test]
fn every_sync_follows_its_logged_event() {
    let (mut f, mut out) = Fixture::new(4);
    out.extend(f.se());
    let spec = f.specified();
    for g in f.guessers() {
        out.extend(f.send(&g, guess(other_than(spec))));
    }
    let events = f.log.events();
    for o in &out {
        if let Message::StateSync(s) = &o.message {
            let ev = events.iter().find(|e| e.game_id == s.game_id && e.seq == s.event_seq).expect("logged");
            assert_eq!(ev.state_hash, s.state_hash);
        }
    }
}

#[test]
fn illegal_request_changes_nothing() {
    let (mut f, _) = Fixture::new(3);
    let before = f.log.events().len();
    let out = f.send("G1", Message::SeSubmit(SeSubmit { player: None, text: "mine".into() }));
    assert_eq!(errors(&out), vec!["notReader".to_string()]);
    let out = f.send("G1", guess(Strategy::Bridging));
    assert_eq!(errors(&out), vec!["wrongPhase".to_string()]);
    let out = f.send("X", Message::Roll(Empty {}));
    assert_eq!(errors(&out), vec!["notMember".to_string()]);
    assert_eq!(f.log.events().len(), before);
}

#[test]
fn discussion_closes_after_time_limit() {
    let (mut f, _) = Fixture::new(4);
    f.se();
    let spec = f.specified();
    let gs = f.guessers();
    f.send(&gs[0], guess(spec));
    f.send(&gs[1], guess(spec));
    f.send(&gs[2], guess(other_than(spec)));
    assert_eq!(f.phase(), Phase::Discussion);
    assert!(f.advance(119 * SEC).is_empty());
    assert_eq!(f.phase(), Phase::Discussion);
    let out = f.advance(SEC);
    assert_eq!(f.phase(), Phase::SecondVote);
    assert!(out.iter().any(|o| matches!(o.message, Message::StateSync(_))));
    assert!(f.kinds().iter().any(|k| k.is_timeout()));
}

#[test]
fn idle_reader_loses_turn() {
    let (mut f, _) = Fixture::new(3);
    f.advance(179 * SEC);
    assert_eq!(f.phase(), Phase::ReaderComposing);
    f.advance(SEC);
    let last = f.room.state().last_round().unwrap();
    assert!(last.skipped);
    assert!(f.room.state().players().iter().all(|p| p.score == 0));
    assert_eq!(f.reader(), "G1");
    assert_eq!(f.phase(), Phase::ReaderComposing);
}

#[test]
fn idle_room_aborts_after_a_full_rotation() {
    let (mut f, _) = Fixture::new(3);
    for turn in 0..2 {
        f.advance(180 * SEC);
        assert!(!f.room.state().is_over(), "turn {turn}");
    }
    // Any request resets the count.
    f.se();
    f.advance(180 * SEC);
    assert_eq!(f.phase(), Phase::RollAndMove);
    assert!(!f.room.state().is_over());
    for _ in 0..2 {
        f.advance(180 * SEC);
    }
    assert!(!f.room.state().is_over());
    for _ in 0..3 {
        f.advance(180 * SEC);
    }
    assert!(f.room.state().is_aborted());
    assert_eq!(f.kinds().last(), Some(&EventKind::Lifecycle(Lifecycle::GameAborted)));
}

#[test]
fn fast_game_logs_no_timeouts() {
    let (mut f, _) = Fixture::new(3);
    play_to_end(&mut f);
    assert!(f.room.state().is_over());
    assert!(!f.kinds().iter().any(|k| k.is_timeout()));
}

#[test]
fn guesser_reconnects_within_grace() {
    let (mut f, _) = Fixture::new(4);
    f.se();
    f.now += 10;
    f.room.disconnect(&p("G2"), f.now).unwrap();
    assert!(matches!(f.room.presence(&p("G2")), Some(Presence::Away { .. })));
    f.advance(10 * SEC);
    let out = f.room.reconnect(&p("G2"), f.now).unwrap();
    assert!(matches!(&out[..], [Outbound { message: Message::StateSync(s), .. }] if s.view.phase == Phase::Guessing));
    let spec = f.specified();
    assert!(errors(&f.send("G2", guess(spec))).is_empty());
    assert_eq!(f.room.state().round().unwrap().first_votes.len(), 2);
}

#[test]
fn absent_reader_turn_skipped_after_grace() {
    let (mut f, _) = Fixture::new(4);
    f.room.disconnect(&p("R"), 0).unwrap();
    f.advance(59 * SEC);
    assert_eq!(f.reader(), "R");
    f.advance(SEC);
    assert_eq!(f.room.presence(&p("R")), Some(Presence::Forfeited));
    assert!(f.room.state().last_round().unwrap().skipped);
    assert_eq!(f.reader(), "G1");
    assert!(!f.room.state().is_over());
    // The forfeited player abstains on later votes.
    f.se();
    let spec = f.specified();
    f.send("G2", guess(spec));
    f.send("G3", guess(spec));
    assert_ne!(f.phase(), Phase::Guessing);
}

#[test]
fn two_of_four_gone_aborts() {
    let (mut f, _) = Fixture::new(4);
    f.room.disconnect(&p("G1"), 0).unwrap();
    f.room.disconnect(&p("G2"), 0).unwrap();
    let out = f.advance(60 * SEC);
    assert!(f.room.state().is_aborted());
    assert!(f.kinds().contains(&EventKind::Lifecycle(Lifecycle::GameAborted)));
    assert!(out.iter().any(|o| matches!(&o.message, Message::GameOver(g) if g.aborted)));
}

#[test]
fn chat_gating_and_discussion_routing() {
    let (mut f, _) = Fixture::new(4);
    let chat = |text: &str| Message::Chat(Chat { from: None, to: None, text: text.into() });
    assert_eq!(errors(&f.send("R", chat("hi"))), vec!["chatDisabled".to_string()]);
    let out = f.send("G1", chat("hello"));
    assert_eq!(out.len(), 4);
    let private = Message::Chat(Chat { from: None, to: Some(vec![p("G2")]), text: "psst".into() });
    let out = f.send("G1", private);
    let mut to: Vec<_> = out.iter().map(|o| o.to.to_string()).collect();
    to.sort();
    assert_eq!(to, vec!["G1", "G2"]);

    f.se();
    let spec = f.specified();
    let gs = f.guessers();
    f.send(&gs[0], guess(spec));
    f.send(&gs[1], guess(other_than(spec)));
    f.send(&gs[2], guess(spec));
    assert_eq!(f.phase(), Phase::Discussion);
    let injected = r#"{"v":1,"seq":9,"code":"Vote2","payload":{"arguments":[]}}"#;
    for _ in 0..3 {
        f.send("G1", chat(injected));
    }
    assert_eq!(errors(&f.send("G1", chat(injected))), vec!["capExceeded".to_string()]);
    let round = f.room.state().round().unwrap();
    assert_eq!(round.discussion_transcript.len(), 3);
    assert!(round.second_votes.is_empty());
    assert_eq!(f.phase(), Phase::Discussion);
    let out = f.send("G2", Message::DiscussMsg(DiscussMsg { player: None, text: "ok".into() }));
    assert!(errors(&out).is_empty());
}

#[test]
fn begin_after_game_over_starts_next_game() {
    let (mut f, _) = Fixture::new(3);
    assert_eq!(errors(&f.send("G1", Message::BeginGame(Empty {}))), vec!["alreadyStarted".to_string()]);
    play_to_end(&mut f);
    let first = f.room.game_id();
    f.send("G1", Message::BeginGame(Empty {}));
    assert_ne!(f.room.game_id(), first);
    assert!(f.room.seq() > 1);
    assert!(f.room.state().players().iter().all(|p| p.score == 0));
    let games = replay_str(&f.log.to_jsonl()).unwrap();
    assert_eq!(games.len(), 2);
    assert_eq!(games[&f.room.game_id()], *f.room.state());
}

/// Every player cooperates: guessers name the task strategy, the reader
/// skips power cards and rolls.
fn play_to_end(f: &mut Fixture) -> Vec<Outbound> {
    let mut all = Vec::new();
    for _ in 0..10_000 {
        if f.room.state().is_over() {
            return all;
        }
        let pending = f.room.state().pending_actors();
        let who = pending[0].to_string();
        let msg = match f.phase() {
            Phase::ReaderComposing => Message::SeSubmit(SeSubmit { player: None, text: format!("turn {}", f.now) }),
            Phase::Guessing => guess(f.specified()),
            Phase::SecondVote => Message::Vote2(Vote2 { arguments: vec![Argument::other(f.specified())] }),
            Phase::PowerWindow => Message::SkipPower(Empty {}),
            Phase::RollAndMove => Message::Roll(Empty {}),
            other => panic!("nobody should be pending in {other:?}"),
        };
        let out = f.send(&who, msg);
        assert!(errors(&out).is_empty(), "{out:?}");
        all.extend(out);
    }
    panic!("game did not finish");
}

#[test]
fn replayed_scores_match_logged_totals() {
    let (mut f, _) = Fixture::new(3);
    let out = play_to_end(&mut f);
    let games = replay_str(&f.log.to_jsonl()).unwrap();
    let state = &games[&f.room.game_id()];
    assert_eq!(state, f.room.state());
    assert!(state.winner().is_some());

    // Seen by R only, so each broadcast is counted once.
    let mut summed = std::collections::BTreeMap::new();
    let mut over = None;
    for o in out.iter().filter(|o| o.to == p("R")) {
        let deltas = match &o.message {
            Message::Vote1Result(v) => v.deltas.clone(),
            Message::ScoreResult(s) => s.deltas.clone(),
            Message::GameOver(g) => {
                over = Some(g.scores.clone());
                continue;
            }
            _ => continue,
        };
        for (who, d) in deltas {
            *summed.entry(who).or_insert(0u32) += d;
        }
    }
    let replayed: std::collections::BTreeMap<_, _> = state.players().iter().map(|p| (p.id.clone(), p.score)).collect();
    assert_eq!(over.unwrap(), replayed);
    for (who, score) in &replayed {
        assert_eq!(summed.get(who).copied().unwrap_or(0), *score);
    }
}

#[test]
fn short_discussion_limit_from_config() {
    let config = GameConfig { discussion_time_limit_ms: 5_000, ..GameConfig::default() };
    let (mut f, _) = Fixture::with_config(3, config);
    f.se();
    let spec = f.specified();
    let gs = f.guessers();
    f.send(&gs[0], guess(spec));
    f.send(&gs[1], guess(other_than(spec)));
    assert_eq!(f.phase(), Phase::Discussion);
    f.advance(Duration::from_secs(5).as_millis() as u64);
    assert_eq!(f.phase(), Phase::SecondVote);
}

use std::collections::BTreeSet;

use miboard_core::game::autopilot::start_game;
use miboard_core::{Action, Corpus, GameConfig, GameState, Phase, PlayerId, TextId, TextRecord};
use miboard_sim::driver::{play_game, GameSpec};
use miboard_sim::invariants::{allowed_targets, expected_next_reader, Checker};
use miboard_sim::{simulate, BotPolicy, Execution, SimConfig};
use proptest::prelude::*;

fn corpus() -> Corpus {
    Corpus::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus")).unwrap()
}

#[test]
fn zero_games_give_an_empty_report() {
    let report = simulate(&corpus(), &SimConfig::new(0, 4, BotPolicy::Random, 1), Execution::default()).unwrap();
    assert!(report.games.is_empty());
    assert_eq!(report.summary.games, 0);
    assert_eq!(report.summary.violations, 0);
}

#[test]
fn hundred_random_games_are_clean() {
    let report = simulate(&corpus(), &SimConfig::new(100, 4, BotPolicy::Random, 1), Execution::default()).unwrap();
    assert_eq!(report.summary.games, 100);
    assert_eq!(report.summary.violations, 0);
    assert_eq!(report.summary.rejected, 0);
    for g in &report.games {
        assert!(g.winner.is_some());
        assert_eq!(g.trajectory.len() as u32, g.rounds - g.skipped_rounds);
        let totals: Vec<u32> = g.players.iter().map(|p| g.scores[p]).collect();
        assert_eq!(g.trajectory.last(), Some(&totals));
    }
}

#[test]
fn sequential_and_parallel_agree() {
    let corpus = corpus();
    let config = SimConfig::new(24, 3, BotPolicy::Honest { p: 0.6 }, 5);
    let a = simulate(&corpus, &config, Execution::Sequential).unwrap();
    let b = simulate(&corpus, &config, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn three_bot_throughput() {
    let corpus = corpus();
    let config = SimConfig::new(200, 3, BotPolicy::Random, 2);
    let started = std::time::Instant::now();
    let report = simulate(&corpus, &config, Execution::Sequential).unwrap();
    let rate = report.summary.finished as f64 / started.elapsed().as_secs_f64();
    assert!(rate >= 50.0, "{rate:.1} games/s");
}

#[test]
fn honest_bots_with_low_p_discuss() {
    let report =
        simulate(&corpus(), &SimConfig::new(20, 4, BotPolicy::Honest { p: 0.0 }, 3), Execution::default()).unwrap();
    assert_eq!(report.summary.unanimous_rounds, 0);
    assert!(report.summary.discussion_rounds > 0);
    assert_eq!(report.summary.violations, 0);
}

#[test]
fn scripted_worked_example_from_file() {
    let corpus = corpus();
    // Find a seed whose first task is Bridging for 16 points.
    let seed = (0..)
        .find(|&s| {
            let spec = GameSpec::new(0, s, 4, &GameConfig::default(), &BotPolicy::Random);
            let mut g = start_game(&spec.config, spec.players, spec.room_seed, &corpus).unwrap().state;
            g.apply(&Action::DrawTask).unwrap();
            g.task().is_some_and(|t| t.specified_strategy == miboard_core::Strategy::Bridging && t.point_value == 16)
        })
        .unwrap();
    let other = |s: &str| format!(r#"{{"chosen_strategy": "{s}", "reason_code": "Other"}}"#);
    let guess = |s: &str| format!(r#"{{"code": "Guess", "payload": {{"argument": {}}}}}"#, other(s));
    let vote = |ss: &[&str]| {
        let args: Vec<String> = ss.iter().map(|s| other(s)).collect();
        format!(r#"{{"code": "Vote2", "payload": {{"arguments": [{}]}}}}"#, args.join(","))
    };
    let pass = r#"{"code": "DiscussPass"}"#;
    let script = format!(
        r#"{{"seats": [
            [{{"code": "SeSubmit", "payload": {{"text": "Bridging SE #1"}}}}, {pass}, {}],
            [{}, {pass}, {}],
            [{}, {pass}, {}],
            [{}, {pass}, {}]
        ]}}"#,
        vote(&["Bridging"]),
        guess("Bridging"),
        vote(&["Bridging"]),
        guess("Elaboration"),
        vote(&["Bridging", "Elaboration"]),
        guess("Elaboration"),
        vote(&["Elaboration"]),
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("worked.json");
    std::fs::write(&path, script).unwrap();
    let policy = BotPolicy::parse(&format!("script:{}", path.display())).unwrap();
    let (report, _) = play_game(&corpus, &GameSpec::new(0, seed, 4, &GameConfig::default(), &policy)).unwrap();
    assert_eq!(report.trajectory[0], vec![16, 8, 8, 0]);
    assert_eq!(report.rejected, 0);
    assert!(report.violations.is_empty());
}

#[test]
fn rejected_script_steps_are_forfeited() {
    let corpus = corpus();
    // Seat 1 tries to roll while it is a guesser.
    let script = miboard_sim::Script::parse(r#"{"seats": [[], [{"code": "Roll"}]]}"#).unwrap();
    let spec = GameSpec::new(0, 4, 3, &GameConfig::default(), &BotPolicy::Scripted(script));
    let (report, state) = play_game(&corpus, &spec).unwrap();
    assert_eq!(report.rejected, 1);
    assert!(state.is_over());
    assert!(report.violations.is_empty());
}

fn ids(n: usize) -> Vec<PlayerId> {
    (0..n).map(|i| PlayerId::new(format!("p{i}"))).collect()
}

fn small_text() -> TextRecord {
    TextRecord {
        id: TextId::new("t"),
        title: "T".into(),
        sentences: vec!["One.".into(), "Two.".into()],
        targets: vec![1, 2],
    }
}

#[test]
fn checker_flags_a_mislabelled_transition() {
    let mut g = GameState::new_game(GameConfig::default().with_players(3), ids(3), small_text()).unwrap();
    let before = g.clone();
    let out = g.apply(&Action::DrawTask).unwrap();
    let mut v = Vec::new();
    Checker::new(0, &mut v).transition(&before, &Action::ScoreRound, &out, &g);
    assert!(v.iter().any(|v| v.rule == "phaseEdge"));
    let mut clean = Vec::new();
    Checker::new(0, &mut clean).transition(&before, &Action::DrawTask, &out, &g);
    assert!(clean.is_empty(), "{clean:?}");
}

#[test]
fn edge_table_covers_every_phase_once_reached() {
    // Every phase except Lobby is the target of some action.
    let actions = [
        Action::DrawTask,
        Action::SkipTurn,
        Action::TallyFirstVote,
        Action::ScoreRound,
        Action::Abort,
        Action::CloseDiscussion { elapsed_ms: 0 },
        Action::SkipPower { player: PlayerId::new("p") },
        Action::RollAndMove { player: PlayerId::new("p") },
        Action::SubmitSecondVote { player: PlayerId::new("p"), arguments: vec![] },
        Action::SubmitGuess {
            player: PlayerId::new("p"),
            argument: miboard_core::Argument::other(miboard_core::Strategy::Bridging),
        },
        Action::SubmitSelfExplanation { player: PlayerId::new("p"), text: String::new() },
    ];
    let reached: BTreeSet<Phase> = Phase::ALL
        .iter()
        .flat_map(|&from| actions.iter().flat_map(move |a| allowed_targets(a, from).iter().copied()))
        .collect();
    let want: BTreeSet<Phase> = Phase::ALL.iter().copied().filter(|p| *p != Phase::Lobby).collect();
    assert_eq!(reached, want);
    assert!(allowed_targets(&Action::Abort, Phase::GameOver).is_empty());
}

#[test]
fn rotation_oracle_matches_a_skipped_turn() {
    let mut g = GameState::new_game(GameConfig::default().with_players(4), ids(4), small_text()).unwrap();
    assert_eq!(expected_next_reader(&g), 1);
    g.apply(&Action::DrawTask).unwrap();
    let before = g.clone();
    g.apply(&Action::SkipTurn).unwrap();
    assert_eq!(g.reader_seat(), expected_next_reader(&before));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn bots_only_send_legal_requests(seed in any::<u64>(), four in any::<bool>(), honest in 0.0f64..=1.0, random in any::<bool>()) {
        let policy = if random { BotPolicy::Random } else { BotPolicy::Honest { p: honest } };
        let n = if four { 4 } else { 3 };
        let spec = GameSpec::new(0, seed, n, &GameConfig::default(), &policy);
        let (report, state) = play_game(&corpus(), &spec).unwrap();
        prop_assert_eq!(report.rejected, 0);
        prop_assert!(report.violations.is_empty(), "{:?}", report.violations);
        prop_assert!(state.is_over());
    }

    #[test]
    fn same_seed_same_game(seed in any::<u64>()) {
        let corpus = corpus();
        let spec = GameSpec::new(3, seed, 3, &GameConfig::default(), &BotPolicy::Random);
        let (a, _) = play_game(&corpus, &spec).unwrap();
        let (b, _) = play_game(&corpus, &spec).unwrap();
        prop_assert_eq!(a, b);
    }
}

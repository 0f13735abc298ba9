use std::sync::Arc;
use std::time::Duration;

use miboard_core::{Corpus, GameConfig};
use miboard_server::{replay_str, serve, Context, MemoryLog, Timers};
use miboard_sim::{live_drive, BotPolicy, LiveGame, LiveOptions, SimConfig};

fn corpus() -> Arc<Corpus> {
    Arc::new(Corpus::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus")).unwrap())
}

async fn run(
    config: SimConfig,
    timers: Timers,
    game: GameConfig,
    opts: LiveOptions,
) -> (Vec<LiveGame>, Arc<MemoryLog>) {
    let log = Arc::new(MemoryLog::new());
    let ctx = Context {
        corpus: corpus(),
        sink: log.clone(),
        game,
        timers,
        tick: Duration::from_millis(20),
        base_seed: config.seed,
    };
    let handle = serve(tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap(), ctx).unwrap();
    let addr = handle.addr;
    let server = tokio::spawn(handle.wait());
    let games = live_drive(addr, &config, &opts).await.unwrap();
    server.abort();
    (games, log)
}

fn assert_log_matches(games: &[LiveGame], log: &MemoryLog) {
    let replayed = replay_str(&log.to_jsonl()).expect("log replays");
    for g in games {
        assert_eq!(replayed[&g.game_id].state_hash(), g.state_hash, "room {}", g.room_id);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn random_disconnects_still_finish() {
    let opts = LiveOptions { disconnect_rate: 0.2, chaos_seed: 3, ..LiveOptions::default() };
    let config = SimConfig::new(2, 4, BotPolicy::Random, 8);
    let (games, log) = run(config, Timers::default(), GameConfig::default(), opts).await;
    assert_eq!(games.len(), 2);
    for g in &games {
        assert!(g.disconnects > 0);
        assert!(g.winner.is_some() || g.aborted);
    }
    assert_log_matches(&games, &log);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn dropping_every_request_ends_by_timeouts() {
    let opts = LiveOptions { drop_rate: 1.0, deadline: Duration::from_secs(60), ..LiveOptions::default() };
    let timers = Timers { reconnect_grace: Duration::from_secs(1), inactivity: Duration::from_millis(100) };
    let game = GameConfig { discussion_time_limit_ms: 100, ..GameConfig::default() };
    let config = SimConfig::new(2, 3, BotPolicy::Random, 9);
    let (games, log) = run(config, timers, game, opts).await;
    for g in &games {
        assert!(g.aborted);
        assert_eq!(g.requests, 0);
        assert!(g.scores.values().all(|s| *s == 0));
    }
    assert_log_matches(&games, &log);
    assert!(log.events().iter().any(|e| e.kind.is_timeout()));
}

#[tokio::test]
async fn zero_live_games_need_no_server() {
    let config = SimConfig::new(0, 4, BotPolicy::Random, 1);
    let games = live_drive("127.0.0.1:9".parse().unwrap(), &config, &LiveOptions::default()).await.unwrap();
    assert!(games.is_empty());
}

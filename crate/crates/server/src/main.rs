use std::fs::File;
use std::io::{self, BufReader};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use miboard_core::Corpus;
use miboard_server::config::load_game_config;
use miboard_server::export::export_csv;
use miboard_server::{replay, ServerConfig, Timers};

/// Every flag can also be set through an environment variable named
/// `MIBOARD_<FLAG>`, for example `MIBOARD_LISTEN=0.0.0.0:8080`.
#[derive(Parser)]
#[command(name = "miboard-server", version, about = "MiBoard game server", args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(flatten)]
    serve: ServeArgs,
    #[command(subcommand)]
    admin: Option<Admin>,
}

#[derive(clap::Args)]
struct ServeArgs {
    #[arg(long, env = "MIBOARD_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Directory of text records (or a single .json / .jsonl file).
    #[arg(long, env = "MIBOARD_CORPUS", default_value = "corpus")]
    corpus: PathBuf,
    /// Session log, appended to as JSON Lines.
    #[arg(long, env = "MIBOARD_LOG", default_value = "miboard-events.jsonl")]
    log: PathBuf,
    /// Fixed base seed; rooms derive their seeds from it and their ids.
    #[arg(long, env = "MIBOARD_SEED")]
    seed: Option<u64>,
    /// JSON file of game-rule overrides.
    #[arg(long, env = "MIBOARD_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "MIBOARD_RECONNECT_GRACE_MS", default_value_t = 60_000)]
    reconnect_grace_ms: u64,
    #[arg(long, env = "MIBOARD_INACTIVITY_MS", default_value_t = 180_000)]
    inactivity_ms: u64,
    #[arg(long, env = "MIBOARD_TICK_MS", default_value_t = 250)]
    tick_ms: u64,
}

#[derive(Subcommand)]
enum Admin {
    /// Check a corpus and report the number of valid texts.
    ValidateCorpus { path: PathBuf },
    /// Rebuild every game in a log and print final scores and hashes.
    Replay { log: PathBuf },
    /// Write a log as a CSV table.
    Export {
        log: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.admin {
        Some(admin) => run_admin(admin),
        None => serve(cli.serve),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn serve(args: ServeArgs) -> Result<(), Box<dyn std::error::Error>> {
    let mut config = ServerConfig::new(args.listen, args.corpus, args.log);
    config.seed = args.seed;
    if let Some(path) = &args.config {
        config.game = load_game_config(path)?;
    }
    config.timers = Timers {
        reconnect_grace: Duration::from_millis(args.reconnect_grace_ms),
        inactivity: Duration::from_millis(args.inactivity_ms),
    };
    config.tick = Duration::from_millis(args.tick_ms.max(1));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let handle = miboard_server::start(&config).await.map_err(|e| format!("{} ({})", e, e.kind()))?;
        tokio::select! {
            r = handle.wait() => r?,
            _ = tokio::signal::ctrl_c() => log::info!("shutting down"),
        }
        Ok(())
    })
}

fn run_admin(admin: Admin) -> Result<(), Box<dyn std::error::Error>> {
    match admin {
        Admin::ValidateCorpus { path } => {
            let corpus = Corpus::load(&path)?;
            let sentences: usize = corpus.texts().iter().map(|t| t.sentences.len()).sum();
            let targets: usize = corpus.texts().iter().map(|t| t.targets.len()).sum();
            println!("{}: {} texts, {sentences} sentences, {targets} targets: ok", path.display(), corpus.len());
        }
        Admin::Replay { log } => {
            let games = replay(&log)?;
            for (id, state) in &games {
                let scores: Vec<String> = state.players().iter().map(|p| format!("{}={}", p.id, p.score)).collect();
                let end = match (state.winner(), state.is_aborted()) {
                    (Some(w), _) => format!("winner {w}"),
                    (None, true) => "aborted".into(),
                    (None, false) => format!("in progress ({:?})", state.phase()),
                };
                println!("game {id}: {end}; {}; {}", scores.join(" "), state.state_hash());
            }
            println!("{} games replayed", games.len());
        }
        Admin::Export { log, out } => {
            let input = BufReader::new(File::open(&log)?);
            let rows = match out {
                Some(path) => export_csv(input, File::create(path)?)?,
                None => export_csv(input, io::stdout().lock())?,
            };
            eprintln!("{rows} events exported");
        }
    }
    Ok(())
}

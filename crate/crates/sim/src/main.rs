use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::Parser;
use miboard_core::Corpus;
use miboard_server::config::load_game_config;
use miboard_sim::{live_drive, simulate, BotPolicy, Execution, LiveOptions, SimConfig};

/// Plays bot games in-process or against a running server and prints a JSON
/// report on stdout.
#[derive(Parser, Debug)]
#[command(name = "miboard-sim", version)]
struct Cli {
    #[arg(long, default_value_t = 100)]
    games: usize,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u8).range(3..=4))]
    players: u8,
    /// `random`, `honest:<p>` or `script:<file>`.
    #[arg(long, default_value = "random", value_parser = BotPolicy::parse)]
    policy: BotPolicy,
    /// Base seed. Against a server, pass the server's `--seed`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "corpus")]
    corpus: PathBuf,
    /// JSON file of game-rule overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Play against the server at this address instead of in-process.
    #[arg(long)]
    server: Option<SocketAddr>,
    /// Run games on one thread.
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    max_actions: Option<u64>,
    /// Omit per-game details from the report.
    #[arg(long)]
    summary_only: bool,
    #[arg(long, default_value_t = 0.0)]
    disconnect_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    drop_rate: f64,
    #[arg(long, default_value_t = 600)]
    deadline_secs: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    let mut config = SimConfig::new(cli.games, cli.players.into(), cli.policy, cli.seed);
    if let Some(path) = &cli.config {
        config.game = load_game_config(path)?;
    }
    if let Some(n) = cli.max_actions {
        config.max_actions = n;
    }
    let started = Instant::now();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();

    if let Some(addr) = cli.server {
        let opts = LiveOptions {
            disconnect_rate: cli.disconnect_rate,
            drop_rate: cli.drop_rate,
            chaos_seed: cli.seed,
            deadline: Duration::from_secs(cli.deadline_secs),
            ..LiveOptions::default()
        };
        let rt = tokio::runtime::Runtime::new()?;
        let games = rt.block_on(live_drive(addr, &config, &opts))?;
        serde_json::to_writer_pretty(&mut out, &games)?;
        let aborted = games.iter().filter(|g| g.aborted).count();
        eprintln!("{} live games ({aborted} aborted) in {:.1?}", games.len(), started.elapsed());
    } else {
        let corpus = Corpus::load(&cli.corpus)?;
        let exec = if cli.sequential { Execution::Sequential } else { Execution::default() };
        let mut report = simulate(&corpus, &config, exec)?;
        eprint!("{}", report.describe());
        eprintln!("elapsed {:.1?}", started.elapsed());
        if cli.summary_only {
            report.games.clear();
        }
        serde_json::to_writer_pretty(&mut out, &report)?;
    }
    writeln!(out)?;
    Ok(())
}

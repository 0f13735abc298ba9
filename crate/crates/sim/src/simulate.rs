use miboard_core::game::autopilot::StartError;
use miboard_core::{Corpus, GameConfig};

use crate::driver::{play_game, GameSpec, DEFAULT_MAX_ACTIONS};
use crate::policy::BotPolicy;
use crate::report::{GameReport, SimReport};

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub games: usize,
    pub players: usize,
    pub policy: BotPolicy,
    pub seed: u64,
    pub game: GameConfig,
    pub max_actions: u64,
}

impl SimConfig {
    pub fn new(games: usize, players: usize, policy: BotPolicy, seed: u64) -> Self {
        SimConfig { games, players, policy, seed, game: GameConfig::default(), max_actions: DEFAULT_MAX_ACTIONS }
    }

    pub fn spec(&self, index: usize) -> GameSpec {
        let mut spec = GameSpec::new(index, self.seed, self.players, &self.game, &self.policy);
        spec.max_actions = self.max_actions;
        spec
    }
}

/// How games are spread over threads. Every game owns its own seeded RNGs, so
/// both modes give identical reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses rayon when built with the `parallel` feature, otherwise runs
    /// sequentially.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

pub fn simulate(corpus: &Corpus, config: &SimConfig, exec: Execution) -> Result<SimReport, StartError> {
    let one = |i: usize| play_game(corpus, &config.spec(i)).map(|(report, _)| report);
    let games: Result<Vec<GameReport>, StartError> = match exec {
        Execution::Sequential => (0..config.games).map(one).collect(),
        Execution::Parallel => run_parallel(config.games, one),
    };
    Ok(SimReport::new(games?))
}

#[cfg(feature = "parallel")]
fn run_parallel<T: Send, E: Send>(n: usize, f: impl Fn(usize) -> Result<T, E> + Sync + Send) -> Result<Vec<T>, E> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_parallel<T, E>(n: usize, f: impl Fn(usize) -> Result<T, E>) -> Result<Vec<T>, E> {
    (0..n).map(f).collect()
}

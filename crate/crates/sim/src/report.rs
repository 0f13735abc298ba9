use std::collections::BTreeMap;

use miboard_core::{Phase, PlayerId};
use serde::{Deserialize, Serialize};

use crate::invariants::Violation;

/// Everything recorded about one simulated game.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub index: usize,
    pub room_seed: u64,
    pub players: Vec<PlayerId>,
    pub winner: Option<PlayerId>,
    pub aborted: bool,
    /// Reader turns started.
    pub rounds: u32,
    pub actions: u64,
    pub scores: BTreeMap<PlayerId, u32>,
    /// Scores after each completed round, in seat order.
    pub trajectory: Vec<Vec<u32>>,
    pub phase_visits: BTreeMap<Phase, u64>,
    /// Keyed `From->To`.
    pub transitions: BTreeMap<String, u64>,
    pub discussion_rounds: u32,
    pub unanimous_rounds: u32,
    pub skipped_rounds: u32,
    /// Most discussion messages any player sent in one round.
    pub max_discussion_messages: u32,
    /// Bot requests the engine refused; the host forfeited for the bot instead.
    pub rejected: u64,
    pub violations: Vec<Violation>,
    pub final_hash: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub games: usize,
    pub finished: usize,
    pub aborted: usize,
    /// Wins per seat index.
    pub wins_by_seat: Vec<usize>,
    pub mean_rounds: f64,
    pub mean_actions: f64,
    pub discussion_rounds: u64,
    pub unanimous_rounds: u64,
    pub rejected: u64,
    pub max_discussion_messages: u32,
    pub violations: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub summary: Summary,
    pub games: Vec<GameReport>,
}

impl SimReport {
    pub fn new(games: Vec<GameReport>) -> Self {
        let n = games.len();
        let seats = games.iter().map(|g| g.players.len()).max().unwrap_or(0);
        let mut s = Summary { games: n, wins_by_seat: vec![0; seats], ..Summary::default() };
        for g in &games {
            if g.aborted {
                s.aborted += 1;
            } else {
                s.finished += 1;
            }
            if let Some(seat) = g.winner.as_ref().and_then(|w| g.players.iter().position(|p| p == w)) {
                s.wins_by_seat[seat] += 1;
            }
            s.discussion_rounds += u64::from(g.discussion_rounds);
            s.unanimous_rounds += u64::from(g.unanimous_rounds);
            s.rejected += g.rejected;
            s.max_discussion_messages = s.max_discussion_messages.max(g.max_discussion_messages);
            s.violations += g.violations.len();
        }
        if n > 0 {
            s.mean_rounds = games.iter().map(|g| f64::from(g.rounds)).sum::<f64>() / n as f64;
            s.mean_actions = games.iter().map(|g| g.actions as f64).sum::<f64>() / n as f64;
        }
        SimReport { summary: s, games }
    }

    pub fn violations(&self) -> impl Iterator<Item = (usize, &Violation)> {
        self.games.iter().flat_map(|g| g.violations.iter().map(move |v| (g.index, v)))
    }

    /// A few lines for humans.
    pub fn describe(&self) -> String {
        let s = &self.summary;
        let mut out = format!(
            "{} games: {} finished, {} aborted\nmean rounds {:.1}, mean actions {:.1}\n",
            s.games, s.finished, s.aborted, s.mean_rounds, s.mean_actions
        );
        out += &format!("wins by seat {:?}\n", s.wins_by_seat);
        out += &format!(
            "rounds with discussion {}, unanimous {}\nrejected bot requests {}, invariant violations {}\n",
            s.discussion_rounds, s.unanimous_rounds, s.rejected, s.violations
        );
        for (game, v) in self.violations().take(10) {
            out += &format!("  game {game} action {}: {} ({})\n", v.action, v.rule, v.detail);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report() {
        let r = SimReport::new(Vec::new());
        assert_eq!(r.summary.games, 0);
        assert_eq!(r.summary.mean_rounds, 0.0);
        assert!(r.games.is_empty());
        assert!(r.describe().starts_with("0 games"));
    }
}

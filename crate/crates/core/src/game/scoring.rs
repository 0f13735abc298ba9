//! Strict-majority acceptance and round scoring.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::strategy::Strategy;
use crate::PlayerId;

/// Points awarded per accepted strategy that differs from the specified one.
pub const OFF_TASK_BONUS: u32 = 5;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreOutcome {
    pub accepted: Vec<Strategy>,
    /// One entry per player, zero included.
    pub deltas: BTreeMap<PlayerId, u32>,
}

/// A strategy is accepted when strictly more than half of all players
/// selected it. Abstaining players still count in the denominator.
pub fn accepted_strategies<'a>(
    selections: impl IntoIterator<Item = &'a BTreeSet<Strategy>>,
    player_count: usize,
) -> Vec<Strategy> {
    let mut counts = [0usize; 5];
    for set in selections {
        for s in set {
            counts[s.index()] += 1;
        }
    }
    Strategy::ALL.into_iter().filter(|s| 2 * counts[s.index()] > player_count).collect()
}

/// Scores one vote. `votes` maps each voting player to the strategies they
/// selected; `players` lists the whole roster so non-voters get a zero entry.
pub fn score_votes(
    votes: &BTreeMap<PlayerId, BTreeSet<Strategy>>,
    players: &[PlayerId],
    reader: &PlayerId,
    specified: Strategy,
    point_value: u32,
) -> ScoreOutcome {
    let accepted = accepted_strategies(votes.values(), players.len());
    let specified_accepted = accepted.contains(&specified);
    let deltas = players
        .iter()
        .map(|p| {
            let picked = votes.get(p);
            let mut delta = 0;
            if specified_accepted {
                if p == reader {
                    delta += point_value;
                } else if picked.is_some_and(|set| set.contains(&specified)) {
                    delta += point_value / 2;
                }
            }
            if let Some(set) = picked {
                let bonus_hits = accepted.iter().filter(|s| **s != specified && set.contains(s)).count() as u32;
                delta += OFF_TASK_BONUS * bonus_hits;
            }
            (p.clone(), delta)
        })
        .collect();
    ScoreOutcome { accepted, deltas }
}

//! Per-transition checks run on every applied action. The rules here are
//! written out independently of the engine so a regression there shows up as
//! a violation rather than being mirrored.

use miboard_core::game::FirstTally;
use miboard_core::{Action, GameState, Outcome, Phase, PowerPlay};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Index of the offending action within its game.
    pub action: u64,
    pub rule: String,
    pub detail: String,
}

/// Phases an action may lead to from `from`; empty when the action is not
/// allowed there at all.
pub fn allowed_targets(action: &Action, from: Phase) -> &'static [Phase] {
    use Phase::*;
    match (action, from) {
        (Action::Abort, f) if f != GameOver => &[GameOver],
        (Action::ReplaceText { .. }, TaskDraw) => &[TaskDraw],
        (Action::DrawTask, TaskDraw) => &[ReaderComposing],
        (Action::RedrawStrategy { .. } | Action::RedrawPoints { .. }, ReaderComposing) => &[ReaderComposing],
        (Action::SubmitSelfExplanation { .. }, ReaderComposing) => &[Guessing],
        (Action::SkipTurn, ReaderComposing) => &[TaskDraw],
        (Action::SubmitGuess { .. } | Action::Abstain { .. }, Guessing) => &[Guessing, FirstTally],
        (Action::TallyFirstVote, FirstTally) => &[PowerWindow, Discussion],
        (Action::PostDiscussion { .. } | Action::PassDiscussion { .. }, Discussion) => &[Discussion, SecondVote],
        (Action::CloseDiscussion { .. }, Discussion) => &[SecondVote],
        (Action::SubmitSecondVote { .. } | Action::Abstain { .. }, SecondVote) => &[SecondVote, Scoring],
        (Action::ScoreRound, Scoring) => &[PowerWindow],
        (Action::PlayPower { .. } | Action::SkipPower { .. }, PowerWindow) => &[RollAndMove],
        (Action::RollAndMove { .. }, RollAndMove) => &[TaskDraw, GameOver],
        _ => &[],
    }
}

/// Reader for the next turn: the same seat after an extra turn, otherwise the
/// next seat clockwise, skipping (and thawing) frozen players once each.
pub fn expected_next_reader(before: &GameState) -> usize {
    if before.extra_turn_pending() {
        return before.reader_seat();
    }
    let mut frozen: Vec<u32> = before.players().iter().map(|p| p.frozen_turns).collect();
    let n = frozen.len();
    let mut seat = before.reader_seat();
    loop {
        seat = (seat + 1) % n;
        if frozen[seat] == 0 {
            return seat;
        }
        frozen[seat] -= 1;
    }
}

pub struct Checker<'a> {
    index: u64,
    out: &'a mut Vec<Violation>,
}

impl<'a> Checker<'a> {
    pub fn new(index: u64, out: &'a mut Vec<Violation>) -> Self {
        Checker { index, out }
    }

    fn fail(&mut self, rule: &str, detail: String) {
        self.out.push(Violation { action: self.index, rule: rule.into(), detail });
    }

    fn expect(&mut self, ok: bool, rule: &str, detail: impl FnOnce() -> String) {
        if !ok {
            self.fail(rule, detail());
        }
    }

    /// Checks one successful transition `before --action--> after`.
    pub fn transition(&mut self, before: &GameState, action: &Action, outcome: &Outcome, after: &GameState) {
        let config = before.config();
        let targets = allowed_targets(action, before.phase());
        self.expect(targets.contains(&after.phase()), "phaseEdge", || {
            format!("{} took {} -> {}", action.name(), before.phase(), after.phase())
        });

        // Scores never fall, and only scoring steps change them.
        let scored = match outcome {
            Outcome::Scored(s) | Outcome::FirstTally(FirstTally { score: Some(s), .. }) => Some(s),
            _ => None,
        };
        for (b, a) in before.players().iter().zip(after.players()) {
            self.expect(a.score >= b.score, "scoreMonotone", || format!("{} fell {} -> {}", a.id, b.score, a.score));
            let delta = scored.and_then(|s| s.deltas.get(&a.id)).copied().unwrap_or(0);
            self.expect(a.score == b.score + delta, "scoreDelta", || {
                format!("{} moved {} -> {} with delta {delta}", a.id, b.score, a.score)
            });
            self.expect(a.token_position < config.board_length, "tokenBounds", || {
                format!("{} at {} on a board of {}", a.id, a.token_position, config.board_length)
            });
            self.expect(a.discussion_messages_used <= config.discussion_message_cap, "discussionCap", || {
                format!("{} used {}", a.id, a.discussion_messages_used)
            });
            if !matches!(action, Action::RollAndMove { .. }) {
                self.expect(a.token_position == b.token_position, "tokenMoved", || {
                    format!("{} moved on {}", a.id, action.name())
                });
            }
        }

        if let Some(task) = after.task() {
            self.expect(config.point_values.contains(&task.point_value), "pointValue", || {
                format!("{} not configured", task.point_value)
            });
            self.expect(
                task.strategy_redraws_used <= config.max_redraws && task.point_redraws_used <= config.max_redraws,
                "redrawBudget",
                || format!("{task:?}"),
            );
        }

        match (action, outcome) {
            (Action::TallyFirstVote, Outcome::FirstTally(t)) => self.tally(before, t, after),
            (Action::RollAndMove { .. }, Outcome::Moved(m)) => {
                let dice = if before.double_dice_pending() { 2 } else { 1 };
                self.expect(m.roll.dice.len() == dice, "diceCount", || format!("{:?} with {dice} dice", m.roll));
                self.expect(m.roll.dice.iter().all(|d| (1..=6).contains(d)), "dieFace", || format!("{:?}", m.roll));
                self.expect(m.roll.total == m.roll.dice.iter().sum::<u32>(), "dieTotal", || format!("{:?}", m.roll));
                let reader = before.reader_seat();
                self.expect(after.players()[reader].token_position == m.position, "tokenMoved", || {
                    format!("reader at {} but outcome says {}", after.players()[reader].token_position, m.position)
                });
                if after.phase() == Phase::TaskDraw {
                    self.rotation(before, after);
                }
            }
            (Action::SkipTurn, _) => {
                let round = after.last_round();
                self.expect(
                    round.is_some_and(|r| r.skipped && r.score_deltas.values().all(|d| *d == 0)),
                    "skippedRound",
                    || "skipped round must score zero".into(),
                );
                self.rotation(before, after);
            }
            (Action::PlayPower { card: PowerPlay::FreezePlayer { target }, .. }, _) => {
                self.expect(target != before.reader(), "freezeTarget", || "reader froze themselves".into());
            }
            _ => {}
        }

        if after.phase() == Phase::GameOver {
            self.game_over(after);
        }
    }

    fn tally(&mut self, before: &GameState, t: &FirstTally, after: &GameState) {
        let Some(round) = before.round() else {
            return self.fail("tally", "no open round".into());
        };
        let specified = round.task.specified_strategy;
        let unanimous = round.first_votes.values().all(|a| a.chosen_strategy == specified);
        self.expect(t.unanimous == unanimous, "unanimity", || format!("engine said {}", t.unanimous));
        let next = if unanimous { Phase::PowerWindow } else { Phase::Discussion };
        self.expect(after.phase() == next, "unanimousSkipsDiscussion", || format!("went to {}", after.phase()));
        if let Some(s) = &t.score {
            self.expect(s.accepted.len() <= 1, "singleChoiceMajority", || format!("accepted {:?}", s.accepted));
            // First votes include the reader's own implicit vote.
            let majority = 2 * round.first_votes.len() > before.players().len();
            self.expect(s.accepted.contains(&specified) == majority, "unanimousAccepts", || {
                format!("accepted {:?} for {specified:?} with {} votes", s.accepted, round.first_votes.len())
            });
        }
    }

    fn rotation(&mut self, before: &GameState, after: &GameState) {
        let want = expected_next_reader(before);
        self.expect(after.reader_seat() == want, "rotation", || {
            format!("next reader seat {} expected {want}", after.reader_seat())
        });
    }

    fn game_over(&mut self, after: &GameState) {
        let config = after.config();
        match after.winner() {
            Some(w) => {
                let p = after.player(w);
                self.expect(!after.is_aborted(), "gameOver", || "aborted game has a winner".into());
                self.expect(
                    p.is_some_and(|p| {
                        p.token_position >= config.last_square() || p.score >= config.point_win_threshold
                    }),
                    "winCondition",
                    || format!("{w} has not won"),
                );
            }
            None => self.expect(after.is_aborted(), "gameOver", || "finished game without winner".into()),
        }
    }
}

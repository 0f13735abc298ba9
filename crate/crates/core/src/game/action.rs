use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Argument, FirstTally, GameError, GameResult, GameState, MoveOutcome, Phase, ScoreOutcome, TaskAssignment};
use crate::cards::PowerPlay;
use crate::corpus::TextRecord;
use crate::PlayerId;

/// One state transition, in the form stored in the event log and replayed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum Action {
    DrawTask,
    ReplaceText { text: TextRecord },
    RedrawStrategy { player: PlayerId },
    RedrawPoints { player: PlayerId },
    SubmitSelfExplanation { player: PlayerId, text: String },
    SubmitGuess { player: PlayerId, argument: Argument },
    Abstain { player: PlayerId },
    TallyFirstVote,
    PostDiscussion { player: PlayerId, text: String },
    PassDiscussion { player: PlayerId },
    CloseDiscussion { elapsed_ms: u64 },
    SubmitSecondVote { player: PlayerId, arguments: Vec<Argument> },
    ScoreRound,
    PlayPower { player: PlayerId, card: PowerPlay },
    SkipPower { player: PlayerId },
    RollAndMove { player: PlayerId },
    SkipTurn,
    Abort,
}

impl Action {
    /// The player who caused the transition, `None` for host-driven steps.
    pub fn actor(&self) -> Option<&PlayerId> {
        match self {
            Action::RedrawStrategy { player }
            | Action::RedrawPoints { player }
            | Action::SubmitSelfExplanation { player, .. }
            | Action::SubmitGuess { player, .. }
            | Action::Abstain { player }
            | Action::PostDiscussion { player, .. }
            | Action::PassDiscussion { player }
            | Action::SubmitSecondVote { player, .. }
            | Action::PlayPower { player, .. }
            | Action::SkipPower { player }
            | Action::RollAndMove { player } => Some(player),
            Action::DrawTask
            | Action::ReplaceText { .. }
            | Action::TallyFirstVote
            | Action::CloseDiscussion { .. }
            | Action::ScoreRound
            | Action::SkipTurn
            | Action::Abort => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Action::DrawTask => "DrawTask",
            Action::ReplaceText { .. } => "ReplaceText",
            Action::RedrawStrategy { .. } => "RedrawStrategy",
            Action::RedrawPoints { .. } => "RedrawPoints",
            Action::SubmitSelfExplanation { .. } => "SubmitSelfExplanation",
            Action::SubmitGuess { .. } => "SubmitGuess",
            Action::Abstain { .. } => "Abstain",
            Action::TallyFirstVote => "TallyFirstVote",
            Action::PostDiscussion { .. } => "PostDiscussion",
            Action::PassDiscussion { .. } => "PassDiscussion",
            Action::CloseDiscussion { .. } => "CloseDiscussion",
            Action::SubmitSecondVote { .. } => "SubmitSecondVote",
            Action::ScoreRound => "ScoreRound",
            Action::PlayPower { .. } => "PlayPower",
            Action::SkipPower { .. } => "SkipPower",
            Action::RollAndMove { .. } => "RollAndMove",
            Action::SkipTurn => "SkipTurn",
            Action::Abort => "Abort",
        }
    }
}

/// What an applied action produced, beyond the new state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Outcome {
    TaskDrawn(TaskAssignment),
    TextReplaced,
    Redrawn(TaskAssignment),
    SelfExplanationAccepted,
    /// A vote, abstention or discussion step was recorded. `complete` is true
    /// when it closed its phase.
    Recorded {
        complete: bool,
    },
    FirstTally(FirstTally),
    DiscussionClosed,
    Scored(ScoreOutcome),
    PowerPlayed(PowerPlay),
    PowerSkipped,
    Moved(MoveOutcome),
    TurnSkipped,
    Aborted,
}

impl GameState {
    pub fn apply(&mut self, action: &Action) -> GameResult<Outcome> {
        let before = self.phase;
        let out = match action {
            Action::DrawTask => Outcome::TaskDrawn(self.draw_task()?),
            Action::ReplaceText { text } => {
                self.replace_text(text.clone())?;
                Outcome::TextReplaced
            }
            Action::RedrawStrategy { player } => {
                self.reader_only(player)?;
                Outcome::Redrawn(self.redraw_strategy()?)
            }
            Action::RedrawPoints { player } => {
                self.reader_only(player)?;
                Outcome::Redrawn(self.redraw_points()?)
            }
            Action::SubmitSelfExplanation { player, text } => {
                self.submit_self_explanation(player, text)?;
                Outcome::SelfExplanationAccepted
            }
            Action::SubmitGuess { player, argument } => {
                Outcome::Recorded { complete: self.submit_guess(player, argument.clone())? }
            }
            Action::Abstain { player } => {
                self.abstain(player)?;
                Outcome::Recorded { complete: self.phase != before }
            }
            Action::TallyFirstVote => Outcome::FirstTally(self.tally_first_vote()?),
            Action::PostDiscussion { player, text } => {
                self.post_discussion_message(player, text)?;
                Outcome::Recorded { complete: self.phase != before }
            }
            Action::PassDiscussion { player } => {
                self.pass_discussion(player)?;
                Outcome::Recorded { complete: self.phase != before }
            }
            Action::CloseDiscussion { elapsed_ms } => {
                self.close_discussion(Duration::from_millis(*elapsed_ms))?;
                Outcome::DiscussionClosed
            }
            Action::SubmitSecondVote { player, arguments } => {
                Outcome::Recorded { complete: self.submit_second_vote(player, arguments.clone())? }
            }
            Action::ScoreRound => Outcome::Scored(self.score_round()?),
            Action::PlayPower { player, card } => {
                self.play_power_card(player, card.clone())?;
                Outcome::PowerPlayed(card.clone())
            }
            Action::SkipPower { player } => {
                self.reader_only(player)?;
                self.skip_power()?;
                Outcome::PowerSkipped
            }
            Action::RollAndMove { player } => {
                self.reader_only(player)?;
                Outcome::Moved(self.roll_and_move()?)
            }
            Action::SkipTurn => {
                self.skip_turn()?;
                Outcome::TurnSkipped
            }
            Action::Abort => {
                self.abort()?;
                Outcome::Aborted
            }
        };
        Ok(out)
    }

    /// Phase is checked first so out-of-phase requests report `WrongPhase`
    /// regardless of sender.
    fn reader_only(&self, player: &PlayerId) -> GameResult<()> {
        match self.phase {
            Phase::ReaderComposing | Phase::PowerWindow | Phase::RollAndMove => self.expect_reader(player),
            actual => Err(GameError::WrongPhase { actual }),
        }
    }
}

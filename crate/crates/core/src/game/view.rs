use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Argument, DiscussionLine, GameState, Phase, RoundRecord, TaskAssignment};
use crate::cards::PowerKind;
use crate::corpus::{reveal_window, TextId};
use crate::strategy::{ReasonTaxonomy, Strategy};
use crate::PlayerId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublicPlayer {
    pub id: PlayerId,
    pub score: u32,
    pub token_position: u32,
    pub power_card_count: usize,
    pub frozen_turns: u32,
    pub discussion_messages_used: u32,
    pub passed_discussion: bool,
}

/// What one player is allowed to see of the game. Hidden until revealed: the
/// task (guessers see it after the first tally), other players' votes (after
/// the tally or scoring that uses them), and other players' power cards.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerView {
    pub me: PlayerId,
    pub phase: Phase,
    pub reader: PlayerId,
    pub turn: u32,
    pub text_id: TextId,
    pub title: String,
    pub revealed_sentences: Vec<String>,
    pub target_sentence: Option<usize>,
    pub players: Vec<PublicPlayer>,
    pub my_power_cards: Vec<PowerKind>,
    pub task: Option<TaskAssignment>,
    pub self_explanation: Option<String>,
    pub first_votes: BTreeMap<PlayerId, Argument>,
    pub first_voted: Vec<PlayerId>,
    pub unanimous: Option<bool>,
    pub transcript: Vec<DiscussionLine>,
    pub second_votes: BTreeMap<PlayerId, Vec<Argument>>,
    pub second_voted: Vec<PlayerId>,
    pub accepted: Vec<Strategy>,
    pub score_deltas: BTreeMap<PlayerId, u32>,
    pub last_round: Option<RoundRecord>,
    pub pending: Vec<PlayerId>,
    pub chat_allowed: bool,
    pub max_redraws: u32,
    pub discussion_message_cap: u32,
    pub board_length: u32,
    pub point_win_threshold: u32,
    pub reasons: ReasonTaxonomy,
    pub winner: Option<PlayerId>,
    pub aborted: bool,
}

impl PlayerView {
    pub fn is_reader(&self) -> bool {
        self.me == self.reader
    }

    pub fn me_state(&self) -> Option<&PublicPlayer> {
        self.players.iter().find(|p| p.id == self.me)
    }

    /// The player expected to act first, in seat order.
    pub fn first_pending(&self) -> Option<&PlayerId> {
        self.pending.first()
    }
}

impl GameState {
    pub fn view_for(&self, me: &PlayerId) -> PlayerView {
        let round = self.round();
        let is_reader = self.reader() == me;
        let scored = matches!(self.phase, Phase::PowerWindow | Phase::RollAndMove);
        let tallied = round.is_some_and(|r| r.unanimous.is_some());

        let revealed_sentences = reveal_window(self.text(), self.text_turn())
            .map(|w| self.text().sentences[w.start() - 1..*w.end()].to_vec())
            .unwrap_or_default();

        let only_mine = |m: &BTreeMap<PlayerId, Argument>| {
            m.iter().filter(|(p, _)| *p == me).map(|(p, a)| (p.clone(), a.clone())).collect()
        };

        PlayerView {
            me: me.clone(),
            phase: self.phase,
            reader: self.reader().clone(),
            turn: self.turn(),
            text_id: self.text().id.clone(),
            title: self.text().title.clone(),
            revealed_sentences,
            target_sentence: round.map(|r| r.target_sentence),
            players: self
                .players()
                .iter()
                .map(|p| PublicPlayer {
                    id: p.id.clone(),
                    score: p.score,
                    token_position: p.token_position,
                    power_card_count: p.power_cards.len(),
                    frozen_turns: p.frozen_turns,
                    discussion_messages_used: p.discussion_messages_used,
                    passed_discussion: p.passed_discussion,
                })
                .collect(),
            my_power_cards: self.player(me).map(|p| p.power_cards.clone()).unwrap_or_default(),
            task: round.map(|r| r.task).filter(|_| is_reader || tallied),
            self_explanation: round.and_then(|r| r.self_explanation.clone()),
            first_votes: round
                .map(|r| if tallied { r.first_votes.clone() } else { only_mine(&r.first_votes) })
                .unwrap_or_default(),
            first_voted: round
                .map(|r| r.first_votes.keys().filter(|p| *p != self.reader()).cloned().collect())
                .unwrap_or_default(),
            unanimous: round.and_then(|r| r.unanimous),
            transcript: round.map(|r| r.discussion_transcript.clone()).unwrap_or_default(),
            second_votes: round
                .map(|r| {
                    r.second_votes
                        .iter()
                        .filter(|(p, _)| scored || *p == me)
                        .map(|(p, a)| (p.clone(), a.clone()))
                        .collect()
                })
                .unwrap_or_default(),
            second_voted: round.map(|r| r.second_votes.keys().cloned().collect()).unwrap_or_default(),
            accepted: round.map(|r| r.accepted.clone()).unwrap_or_default(),
            score_deltas: round.map(|r| r.score_deltas.clone()).unwrap_or_default(),
            last_round: self.last_round().cloned(),
            pending: self.pending_actors(),
            chat_allowed: self.chat_allowed(me),
            max_redraws: self.config().max_redraws,
            discussion_message_cap: self.config().discussion_message_cap,
            board_length: self.config().board_length,
            point_win_threshold: self.config().point_win_threshold,
            reasons: self.config().reasons.clone(),
            winner: self.winner().cloned(),
            aborted: self.is_aborted(),
        }
    }
}

//! Bot decision making. Bots see only their own [`PlayerView`], exactly as a
//! remote client would.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use miboard_core::protocol::{
    decode, DiscussMsg, DiscussPass, Empty, Guess, Message, PlayPower, Redraw, RedrawKind, SeSubmit, Vote2,
};
use miboard_core::{Argument, Phase, PlayerView, PowerKind, PowerPlay, ReasonCode, Span, Strategy};
use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub enum BotPolicy {
    /// Uniform choices among legal moves.
    Random,
    /// Names the task strategy with probability `p`, otherwise a uniform
    /// other strategy.
    Honest { p: f64 },
    /// Plays a fixed list of requests per seat, then falls back to `Random`.
    Scripted(Script),
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("unknown policy `{0}` (expected random, honest:<p> or script:<file>)")]
    Unknown(String),
    #[error("honest probability must be in [0, 1], got `{0}`")]
    BadProbability(String),
    #[error("script {path}: {message}")]
    Script { path: String, message: String },
}

impl BotPolicy {
    /// Parses `random`, `honest:<p>` or `script:<file>`.
    pub fn parse(s: &str) -> Result<Self, PolicyError> {
        if s == "random" {
            return Ok(BotPolicy::Random);
        }
        if let Some(p) = s.strip_prefix("honest:") {
            let v: f64 = p.parse().map_err(|_| PolicyError::BadProbability(p.into()))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(PolicyError::BadProbability(p.into()));
            }
            return Ok(BotPolicy::Honest { p: v });
        }
        if let Some(path) = s.strip_prefix("script:") {
            return Script::load(Path::new(path)).map(BotPolicy::Scripted);
        }
        Err(PolicyError::Unknown(s.into()))
    }
}

/// Per-seat request lists.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Script {
    pub seats: Vec<Vec<Message>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptFile {
    seats: Vec<Vec<ScriptStep>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptStep {
    code: String,
    #[serde(default = "empty_object")]
    payload: serde_json::Value,
}

fn empty_object() -> serde_json::Value {
    serde_json::json!({})
}

impl Script {
    /// Script files hold `{"seats": [[{"code": ..., "payload": ...}, ...], ...]}`
    /// with one list per seat, validated against the wire schema.
    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let err = |message: String| PolicyError::Script { path: path.display().to_string(), message };
        let raw = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        Self::parse(&raw).map_err(err)
    }

    pub fn parse(raw: &str) -> Result<Self, String> {
        let file: ScriptFile = serde_json::from_str(raw).map_err(|e| e.to_string())?;
        let mut seats = Vec::new();
        for (seat, steps) in file.seats.into_iter().enumerate() {
            let mut out = Vec::new();
            for (i, step) in steps.into_iter().enumerate() {
                let frame = serde_json::json!({"v": 1, "seq": 1, "code": step.code, "payload": step.payload});
                let frame = decode(frame.to_string().as_bytes()).map_err(|e| format!("seat {seat} step {i}: {e}"))?;
                out.push(frame.message);
            }
            seats.push(out);
        }
        Ok(Script { seats })
    }
}

/// One seat's decision maker with its own random stream.
pub struct Bot {
    policy: BotPolicy,
    script: VecDeque<Message>,
    rng: ChaCha8Rng,
}

impl Bot {
    pub fn new(policy: BotPolicy, seat: usize, rng: ChaCha8Rng) -> Self {
        let script = match &policy {
            BotPolicy::Scripted(s) => s.seats.get(seat).cloned().unwrap_or_default().into(),
            _ => VecDeque::new(),
        };
        Bot { policy, script, rng }
    }

    /// The request this bot sends when it is the first pending player.
    pub fn decide(&mut self, view: &PlayerView) -> Message {
        if let Some(m) = self.script.pop_front() {
            return m;
        }
        let honest = match self.policy {
            BotPolicy::Honest { p } => Some(p),
            _ => None,
        };
        match view.phase {
            Phase::ReaderComposing => self.compose(view, honest.is_none()),
            Phase::Guessing => {
                let s = match honest {
                    Some(p) => self.honest_pick(p, strategy_in_se(view)),
                    None => self.any_strategy(),
                };
                Message::Guess(Guess { argument: self.argument(view, s) })
            }
            Phase::Discussion => {
                let used = view.me_state().map_or(0, |p| p.discussion_messages_used);
                if honest.is_none() && used < view.discussion_message_cap && self.rng.gen_bool(0.5) {
                    let text = format!("I think it was {}", self.any_strategy().display_name());
                    Message::DiscussMsg(DiscussMsg { player: None, text })
                } else {
                    Message::DiscussPass(DiscussPass { player: None })
                }
            }
            Phase::SecondVote => Message::Vote2(Vote2 { arguments: self.second_vote(view, honest) }),
            Phase::PowerWindow => self.power(view),
            _ => Message::Roll(Empty {}),
        }
    }

    fn compose(&mut self, view: &PlayerView, may_redraw: bool) -> Message {
        if let (true, Some(task)) = (may_redraw, &view.task) {
            if task.strategy_redraws_used < view.max_redraws && self.rng.gen_bool(0.1) {
                return Message::Redraw(Redraw { kind: RedrawKind::Strategy });
            }
            if task.point_redraws_used < view.max_redraws && self.rng.gen_bool(0.1) {
                return Message::Redraw(Redraw { kind: RedrawKind::Points });
            }
        }
        let strategy = view.task.map_or(Strategy::Paraphrasing, |t| t.specified_strategy);
        Message::SeSubmit(SeSubmit { player: None, text: se_text(strategy, view.turn) })
    }

    fn any_strategy(&mut self) -> Strategy {
        *Strategy::ALL.choose(&mut self.rng).expect("five strategies")
    }

    fn honest_pick(&mut self, p: f64, truth: Option<Strategy>) -> Strategy {
        match truth {
            Some(t) if self.rng.gen_bool(p) => t,
            Some(t) => *Strategy::ALL.iter().filter(|s| **s != t).choose(&mut self.rng).expect("four others"),
            None => self.any_strategy(),
        }
    }

    fn argument(&mut self, view: &PlayerView, strategy: Strategy) -> Argument {
        let reason = view.reasons.reasons(strategy).choose(&mut self.rng).cloned().unwrap_or_else(ReasonCode::other);
        let len = view.self_explanation.as_deref().map_or(0, |s| s.chars().count());
        if reason.is_other() || len == 0 {
            return Argument { chosen_strategy: strategy, reason_code: ReasonCode::other(), highlight_span: None };
        }
        let start = self.rng.gen_range(0..len);
        let end = self.rng.gen_range(start + 1..=len);
        Argument { chosen_strategy: strategy, reason_code: reason, highlight_span: Some(Span { start, end }) }
    }

    fn second_vote(&mut self, view: &PlayerView, honest: Option<f64>) -> Vec<Argument> {
        let specified = view.task.map(|t| t.specified_strategy);
        let mut picks: Vec<Strategy> = match (honest, specified) {
            _ if view.is_reader() => vec![specified.unwrap_or(Strategy::Paraphrasing)],
            (Some(p), truth) => vec![self.honest_pick(p, truth)],
            (None, _) => {
                let k = self.rng.gen_range(1..=2);
                Strategy::ALL.choose_multiple(&mut self.rng, k).copied().collect()
            }
        };
        if view.is_reader() && honest.is_none() && self.rng.gen_bool(0.3) {
            let extra = self.any_strategy();
            if !picks.contains(&extra) {
                picks.push(extra);
            }
        }
        picks.into_iter().map(|s| self.argument(view, s)).collect()
    }

    fn power(&mut self, view: &PlayerView) -> Message {
        if view.my_power_cards.is_empty() || self.rng.gen_bool(0.5) {
            return Message::SkipPower(Empty {});
        }
        let card = match *view.my_power_cards.choose(&mut self.rng).expect("non-empty") {
            PowerKind::ExtraTurn => PowerPlay::ExtraTurn,
            PowerKind::DoubleDice => PowerPlay::DoubleDice,
            PowerKind::FreezePlayer => {
                let target = view.players.iter().filter(|p| p.id != view.me).choose(&mut self.rng).expect("others");
                PowerPlay::FreezePlayer { target: target.id.clone() }
            }
        };
        Message::PlayPower(PlayPower { card })
    }
}

/// Template self-explanation: names the strategy, so honest guessers can
/// recover it without seeing the hidden task.
pub fn se_text(strategy: Strategy, turn: u32) -> String {
    format!("{} SE #{turn}", strategy.display_name())
}

fn strategy_in_se(view: &PlayerView) -> Option<Strategy> {
    let se = view.self_explanation.as_deref()?;
    let name = se.rsplit_once(" SE #")?.0;
    name.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_policies() {
        assert_eq!(BotPolicy::parse("random").unwrap(), BotPolicy::Random);
        assert_eq!(BotPolicy::parse("honest:0.75").unwrap(), BotPolicy::Honest { p: 0.75 });
        assert!(matches!(BotPolicy::parse("honest:2"), Err(PolicyError::BadProbability(_))));
        assert!(matches!(BotPolicy::parse("greedy"), Err(PolicyError::Unknown(_))));
        assert!(matches!(BotPolicy::parse("script:/no/such/file"), Err(PolicyError::Script { .. })));
    }

    #[test]
    fn parses_scripts() {
        let s = Script::parse(r#"{"seats": [[{"code": "SeSubmit", "payload": {"text": "hi"}}], [{"code": "Roll"}]]}"#)
            .unwrap();
        assert_eq!(s.seats.len(), 2);
        assert_eq!(s.seats[1], vec![Message::Roll(Empty {})]);
        assert!(Script::parse(r#"{"seats": [[{"code": "Guess", "payload": {}}]]}"#).is_err());
    }

    #[test]
    fn se_text_names_strategy() {
        for s in Strategy::ALL {
            let text = se_text(s, 3);
            assert_eq!(text.rsplit_once(" SE #").unwrap().0.parse::<Strategy>().unwrap(), s);
        }
    }
}

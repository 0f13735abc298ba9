//! Wire protocol.
//!
//! Every transport message is one UTF-8 JSON object:
//!
//! ```json
//! {"v": 1, "seq": 7, "code": "Guess", "payload": { ... }}
//! ```
//!
//! `code` selects a fixed payload schema. Chat is its own code and its text is
//! never inspected, so nothing typed into chat can act as a game command.
//! Decoding is total: any byte string yields either a frame or a
//! [`CodecError`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::cards::{EventCard, PowerKind, PowerPlay};
use crate::game::{Action, Argument, Phase, PlayerView};
use crate::lobby::RoomId;
use crate::strategy::Strategy;
use crate::PlayerId;

pub const PROTOCOL_VERSION: u32 = 1;
pub const MAX_FRAME_BYTES: usize = 64 * 1024;

macro_rules! message_codes {
    ($($code:ident => $payload:ty),* $(,)?) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum MessageCode { $($code),* }

        impl MessageCode {
            pub const ALL: &'static [MessageCode] = &[$(MessageCode::$code),*];

            pub fn as_str(self) -> &'static str {
                match self { $(MessageCode::$code => stringify!($code)),* }
            }
        }

        impl FromStr for MessageCode {
            type Err = ();
            fn from_str(s: &str) -> Result<Self, ()> {
                match s { $(stringify!($code) => Ok(MessageCode::$code),)* _ => Err(()) }
            }
        }

        #[derive(Clone, Debug, PartialEq, Eq)]
        pub enum Message { $($code($payload)),* }

        impl Message {
            pub fn code(&self) -> MessageCode {
                match self { $(Message::$code(_) => MessageCode::$code),* }
            }

            fn payload_value(&self) -> Result<Value, serde_json::Error> {
                match self { $(Message::$code(p) => serde_json::to_value(p)),* }
            }

            fn from_payload(code: MessageCode, payload: Value) -> Result<Message, serde_json::Error> {
                match code { $(MessageCode::$code => Ok(Message::$code(parse_payload(payload)?))),* }
            }
        }
    };
}

message_codes! {
    JoinZone => JoinZone,
    RoomAssigned => RoomAssigned,
    BeginGame => Empty,
    StateSync => StateSync,
    TaskDrawn => TaskDrawn,
    Redraw => Redraw,
    SeSubmit => SeSubmit,
    Guess => Guess,
    Vote1Result => Vote1Result,
    DiscussMsg => DiscussMsg,
    DiscussPass => DiscussPass,
    Vote2 => Vote2,
    ScoreResult => ScoreResult,
    PlayPower => PlayPower,
    SkipPower => Empty,
    Roll => Empty,
    RollResult => RollResult,
    EventApplied => EventApplied,
    GameOver => GameOver,
    Chat => Chat,
    Error => ErrorPayload,
    Ping => Ping,
    Pong => Ping,
}

fn parse_payload<T: DeserializeOwned>(v: Value) -> Result<T, serde_json::Error> {
    serde_json::from_value(v)
}

impl fmt::Display for MessageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Empty {}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JoinZone {
    pub zone: String,
    pub player: PlayerId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomAssigned {
    pub room_id: RoomId,
    pub zone: String,
    pub members: Vec<PlayerId>,
    pub started: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSync {
    pub room_id: RoomId,
    pub game_id: u64,
    /// Sequence number of the last logged event reflected in `view`.
    pub event_seq: u64,
    pub state_hash: String,
    pub view: Box<PlayerView>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDrawn {
    pub reader: PlayerId,
    pub turn: u32,
    pub target_sentence: usize,
    /// Present only in the copy sent to the reader.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_value: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RedrawKind {
    Strategy,
    Points,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Redraw {
    pub kind: RedrawKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeSubmit {
    /// Filled in by the server when relaying; ignored on requests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub player: Option<PlayerId>,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Guess {
    pub argument: Argument,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vote1Result {
    pub unanimous: bool,
    pub specified: Strategy,
    pub point_value: u32,
    pub votes: BTreeMap<PlayerId, Argument>,
    pub deltas: BTreeMap<PlayerId, u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscussMsg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub player: Option<PlayerId>,
    pub text: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscussPass {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub player: Option<PlayerId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vote2 {
    pub arguments: Vec<Argument>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreResult {
    pub accepted: Vec<Strategy>,
    pub deltas: BTreeMap<PlayerId, u32>,
    pub totals: BTreeMap<PlayerId, u32>,
    pub votes: BTreeMap<PlayerId, Vec<Argument>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayPower {
    pub card: PowerPlay,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RollResult {
    pub reader: PlayerId,
    pub dice: Vec<u32>,
    pub total: u32,
    pub landed: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventApplied {
    pub reader: PlayerId,
    pub card: Option<EventCard>,
    pub position: u32,
    /// Only the reader learns which power card was drawn.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_drawn: Option<PowerKind>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameOver {
    pub winner: Option<PlayerId>,
    pub scores: BTreeMap<PlayerId, u32>,
    pub aborted: bool,
    pub state_hash: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Chat {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<PlayerId>,
    /// Private recipients; `None` means the whole room.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<Vec<PlayerId>>,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorPayload {
    pub kind: String,
    pub message: String,
}

impl ErrorPayload {
    pub fn new(kind: impl Into<String>, message: impl fmt::Display) -> Self {
        ErrorPayload { kind: kind.into(), message: message.to_string() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ping {
    pub nonce: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub v: u32,
    pub seq: u64,
    pub message: Message,
}

impl Frame {
    pub fn new(seq: u64, message: Message) -> Self {
        Frame { v: PROTOCOL_VERSION, seq, message }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("unknown message code `{0}`")]
    UnknownCode(String),
    #[error("frame of {0} bytes exceeds the {MAX_FRAME_BYTES}-byte limit")]
    Oversize(usize),
    #[error("payload does not match the {code} schema: {detail}")]
    SchemaViolation { code: String, detail: String },
    #[error("protocol version {0} not supported")]
    VersionMismatch(u64),
}

impl CodecError {
    pub fn kind(&self) -> &'static str {
        match self {
            CodecError::Malformed(_) => "malformed",
            CodecError::UnknownCode(_) => "unknownCode",
            CodecError::Oversize(_) => "oversize",
            CodecError::SchemaViolation { .. } => "schemaViolation",
            CodecError::VersionMismatch(_) => "versionMismatch",
        }
    }
}

const ENVELOPE_KEYS: [&str; 4] = ["v", "seq", "code", "payload"];

pub fn encode(frame: &Frame) -> Result<String, CodecError> {
    let code = frame.message.code();
    let payload = frame
        .message
        .payload_value()
        .map_err(|e| CodecError::SchemaViolation { code: code.to_string(), detail: e.to_string() })?;
    let mut obj = Map::new();
    obj.insert("v".into(), Value::from(frame.v));
    obj.insert("seq".into(), Value::from(frame.seq));
    obj.insert("code".into(), Value::from(code.as_str()));
    obj.insert("payload".into(), payload);
    let text = Value::Object(obj).to_string();
    if text.len() > MAX_FRAME_BYTES {
        return Err(CodecError::Oversize(text.len()));
    }
    Ok(text)
}

pub fn decode(bytes: &[u8]) -> Result<Frame, CodecError> {
    if bytes.len() > MAX_FRAME_BYTES {
        return Err(CodecError::Oversize(bytes.len()));
    }
    let value: Value = serde_json::from_slice(bytes).map_err(|e| CodecError::Malformed(e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(CodecError::Malformed("frame is not a JSON object".into()));
    };
    for key in ENVELOPE_KEYS {
        if !obj.contains_key(key) {
            return Err(CodecError::Malformed(format!("missing `{key}`")));
        }
    }
    if let Some(extra) = obj.keys().find(|k| !ENVELOPE_KEYS.contains(&k.as_str())) {
        return Err(CodecError::Malformed(format!("unexpected envelope field `{extra}`")));
    }
    let v = obj["v"].as_u64().ok_or_else(|| CodecError::Malformed("`v` must be an integer".into()))?;
    if v != u64::from(PROTOCOL_VERSION) {
        return Err(CodecError::VersionMismatch(v));
    }
    let seq = obj["seq"].as_u64().ok_or_else(|| CodecError::Malformed("`seq` must be an integer".into()))?;
    let code_str = obj["code"].as_str().ok_or_else(|| CodecError::Malformed("`code` must be a string".into()))?;
    let code =
        code_str.parse::<MessageCode>().map_err(|()| CodecError::UnknownCode(code_str.chars().take(64).collect()))?;
    let payload = obj.remove("payload").expect("checked above");
    let message = Message::from_payload(code, payload)
        .map_err(|e| CodecError::SchemaViolation { code: code.to_string(), detail: e.to_string() })?;
    Ok(Frame { v: PROTOCOL_VERSION, seq, message })
}

/// Coarse role used for chat gating.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChatRole {
    /// In a room whose game has not started.
    LobbyMember,
    Reader,
    Guesser,
}

/// Chat is open during discussion, in the lobby, and whenever the role has
/// nothing to do in the current phase.
pub fn gate_chat(phase: Phase, role: ChatRole) -> bool {
    if role == ChatRole::LobbyMember || matches!(phase, Phase::Lobby | Phase::Discussion) {
        return true;
    }
    let busy = match phase {
        Phase::ReaderComposing | Phase::PowerWindow | Phase::RollAndMove => role == ChatRole::Reader,
        Phase::Guessing => role == ChatRole::Guesser,
        Phase::SecondVote => true,
        _ => false,
    };
    !busy
}

/// Maps a player's game request to the rules-engine action it asks for.
/// Returns `None` for messages that are not game requests.
pub fn request_action(player: &PlayerId, message: &Message) -> Option<Action> {
    let player = player.clone();
    let action = match message {
        Message::Redraw(Redraw { kind: RedrawKind::Strategy }) => Action::RedrawStrategy { player },
        Message::Redraw(Redraw { kind: RedrawKind::Points }) => Action::RedrawPoints { player },
        Message::SeSubmit(se) => Action::SubmitSelfExplanation { player, text: se.text.clone() },
        Message::Guess(g) => Action::SubmitGuess { player, argument: g.argument.clone() },
        Message::DiscussMsg(m) => Action::PostDiscussion { player, text: m.text.clone() },
        Message::DiscussPass(_) => Action::PassDiscussion { player },
        Message::Vote2(v) => Action::SubmitSecondVote { player, arguments: v.arguments.clone() },
        Message::PlayPower(p) => Action::PlayPower { player, card: p.card.clone() },
        Message::SkipPower(_) => Action::SkipPower { player },
        Message::Roll(_) => Action::RollAndMove { player },
        _ => return None,
    };
    Some(action)
}

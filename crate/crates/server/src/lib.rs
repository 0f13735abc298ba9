//! MiBoard game server: hosts rooms over WebSocket, persists a write-ahead
//! session log, and rebuilds games from it.

pub mod config;
pub mod event_log;
pub mod export;
pub mod host;
pub mod replay;
pub mod room;

pub use config::ServerConfig;
pub use event_log::{EventKind, EventPayload, EventSink, FileLog, Lifecycle, MemoryLog, SessionEvent};
pub use host::{serve, start, Context, RoomSummary, ServerError, ServerHandle};
pub use replay::{replay, replay_str, ReplayError};
pub use room::{Outbound, Presence, RoomError, RoomRuntime, Timers};

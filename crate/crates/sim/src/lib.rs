//! Bot harness for MiBoard: scripted and random players, an in-process game
//! driver with per-transition invariant checks, batch simulation and a
//! WebSocket driver for a running server.

pub mod driver;
pub mod invariants;
pub mod live;
pub mod policy;
pub mod report;
pub mod simulate;

pub use driver::{play_game, play_in_room, GameSpec, RoomGame};
pub use live::{live_drive, LiveError, LiveGame, LiveOptions};
pub use policy::{Bot, BotPolicy, Script};
pub use report::{GameReport, SimReport, Summary};
pub use simulate::{simulate, Execution, SimConfig};

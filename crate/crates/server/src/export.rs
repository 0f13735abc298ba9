//! Flattens a session log into a CSV table for analysis tools.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::event_log::{EventPayload, SessionEvent};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("corrupt log line {line}: {message}")]
    CorruptLine { line: usize, message: String },
}

pub const COLUMNS: [&str; 11] = [
    "timestamp_ms",
    "room_id",
    "game_id",
    "seq",
    "kind",
    "actor",
    "action",
    "resulting_phase",
    "state_hash",
    "payload",
    "detail",
];

/// Writes one row per event and returns the row count.
pub fn export_csv(log: impl BufRead, out: impl Write) -> Result<usize, ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    let mut rows = 0;
    for (i, line) in log.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: SessionEvent = serde_json::from_str(&line)
            .map_err(|e| ExportError::CorruptLine { line: i + 1, message: e.to_string() })?;
        let (action, payload, detail) = match &ev.payload {
            EventPayload::Created { setup } => {
                ("".to_string(), serde_json::to_string(setup).map_err(io::Error::other)?, String::new())
            }
            EventPayload::Action { action } => {
                (action.name().to_string(), serde_json::to_string(action).map_err(io::Error::other)?, String::new())
            }
            EventPayload::Note { detail } => (String::new(), String::new(), detail.clone()),
        };
        w.write_record([
            ev.timestamp_ms.to_string(),
            ev.room_id.0.to_string(),
            ev.game_id.to_string(),
            ev.seq.to_string(),
            ev.kind.to_string(),
            ev.actor.map(|a| a.to_string()).unwrap_or_default(),
            action,
            format!("{:?}", ev.resulting_phase),
            ev.state_hash,
            payload,
            detail,
        ])?;
        rows += 1;
    }
    w.flush()?;
    Ok(rows)
}

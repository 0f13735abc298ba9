//! Zones, capacity-bounded rooms and first-fit matchmaking.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::PlayerId;

pub const ROOM_CAPACITY: usize = 4;
pub const MIN_PLAYERS: usize = 3;
pub const DEFAULT_ZONE: &str = "default";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoomId(pub u64);

impl fmt::Display for RoomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Room {
    pub room_id: RoomId,
    pub zone_id: String,
    pub members: Vec<PlayerId>,
    pub capacity: usize,
    pub started: bool,
}

impl Room {
    pub fn is_open(&self) -> bool {
        !self.started && self.members.len() < self.capacity
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Zone {
    pub zone_id: String,
    /// Creation order, which is the first-fit scan order.
    pub rooms: Vec<Room>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LobbyError {
    #[error("player `{0}` is already in room {1}")]
    DuplicateMembership(PlayerId, RoomId),
    #[error("a game needs at least {MIN_PLAYERS} players")]
    TooFewPlayers,
    #[error("room {0} has already started")]
    AlreadyStarted(RoomId),
    #[error("player `{0}` is not a member of room {1}")]
    NotMember(PlayerId, RoomId),
    #[error("player `{0}` is not in a room")]
    NotInRoom(PlayerId),
    #[error("unknown room {0}")]
    UnknownRoom(RoomId),
    #[error("room {0} is playing; leaving is handled by the disconnect policy")]
    GameInProgress(RoomId),
}

impl LobbyError {
    pub fn code(&self) -> &'static str {
        match self {
            LobbyError::DuplicateMembership(..) => "duplicateMembership",
            LobbyError::TooFewPlayers => "tooFewPlayers",
            LobbyError::AlreadyStarted(_) => "alreadyStarted",
            LobbyError::NotMember(..) => "notMember",
            LobbyError::NotInRoom(_) => "notInRoom",
            LobbyError::UnknownRoom(_) => "unknownRoom",
            LobbyError::GameInProgress(_) => "gameInProgress",
        }
    }
}

/// All zones. Room ids are allocated from one counter so they are unique
/// across zones and increase with creation order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lobby {
    zones: BTreeMap<String, Zone>,
    next_room_id: u64,
}

impl Lobby {
    pub fn new() -> Self {
        Lobby::default()
    }

    pub fn zone(&self, zone_id: &str) -> Option<&Zone> {
        self.zones.get(zone_id)
    }

    pub fn rooms(&self) -> impl Iterator<Item = &Room> {
        self.zones.values().flat_map(|z| z.rooms.iter())
    }

    pub fn room(&self, id: RoomId) -> Option<&Room> {
        self.rooms().find(|r| r.room_id == id)
    }

    fn room_mut(&mut self, id: RoomId) -> Option<&mut Room> {
        self.zones.values_mut().flat_map(|z| z.rooms.iter_mut()).find(|r| r.room_id == id)
    }

    pub fn room_of(&self, player: &PlayerId) -> Option<&Room> {
        self.rooms().find(|r| r.members.contains(player))
    }

    /// Puts the player into the first room of the zone that has not started
    /// and is not full, creating a room when there is none.
    pub fn find_or_create_room(&mut self, zone_id: &str, player: PlayerId) -> Result<RoomId, LobbyError> {
        if let Some(room) = self.room_of(&player) {
            return Err(LobbyError::DuplicateMembership(player, room.room_id));
        }
        let zone = self
            .zones
            .entry(zone_id.to_string())
            .or_insert_with(|| Zone { zone_id: zone_id.to_string(), rooms: Vec::new() });
        if let Some(room) = zone.rooms.iter_mut().find(|r| r.is_open()) {
            room.members.push(player);
            return Ok(room.room_id);
        }
        self.next_room_id += 1;
        let room_id = RoomId(self.next_room_id);
        zone.rooms.push(Room {
            room_id,
            zone_id: zone_id.to_string(),
            members: vec![player],
            capacity: ROOM_CAPACITY,
            started: false,
        });
        Ok(room_id)
    }

    /// Marks the room started and returns its roster in join order.
    pub fn begin_game(&mut self, room_id: RoomId, initiator: &PlayerId) -> Result<Vec<PlayerId>, LobbyError> {
        let room = self.room_mut(room_id).ok_or(LobbyError::UnknownRoom(room_id))?;
        if !room.members.contains(initiator) {
            return Err(LobbyError::NotMember(initiator.clone(), room_id));
        }
        if room.started {
            return Err(LobbyError::AlreadyStarted(room_id));
        }
        if room.members.len() < MIN_PLAYERS {
            return Err(LobbyError::TooFewPlayers);
        }
        room.started = true;
        Ok(room.members.clone())
    }

    /// Removes a player from an unstarted room; empty rooms are dropped.
    pub fn leave_room(&mut self, player: &PlayerId) -> Result<RoomId, LobbyError> {
        let room_id = self.room_of(player).map(|r| r.room_id).ok_or_else(|| LobbyError::NotInRoom(player.clone()))?;
        let room = self.room_mut(room_id).expect("just found");
        if room.started {
            return Err(LobbyError::GameInProgress(room_id));
        }
        room.members.retain(|m| m != player);
        for zone in self.zones.values_mut() {
            zone.rooms.retain(|r| !r.members.is_empty());
        }
        Ok(room_id)
    }

    /// Drops a room regardless of state, e.g. once its game has ended and
    /// everyone has left.
    pub fn close_room(&mut self, room_id: RoomId) -> Option<Room> {
        for zone in self.zones.values_mut() {
            if let Some(i) = zone.rooms.iter().position(|r| r.room_id == room_id) {
                return Some(zone.rooms.remove(i));
            }
        }
        None
    }
}

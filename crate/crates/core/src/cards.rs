//! Event cards, power cards and shuffled decks.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::PlayerId;

/// Drawn after landing on a square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EventCard {
    Forward(u8),
    Backward(u8),
    DrawPower,
}

impl EventCard {
    pub const ALL: [EventCard; 7] = [
        EventCard::Forward(1),
        EventCard::Forward(2),
        EventCard::Forward(3),
        EventCard::Backward(1),
        EventCard::Backward(2),
        EventCard::Backward(3),
        EventCard::DrawPower,
    ];

    pub fn is_valid(self) -> bool {
        match self {
            EventCard::Forward(n) | EventCard::Backward(n) => (1..=3).contains(&n),
            EventCard::DrawPower => true,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid event card `{0}`")]
pub struct InvalidCard(pub String);

impl fmt::Display for EventCard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventCard::Forward(n) => write!(f, "Forward{n}"),
            EventCard::Backward(n) => write!(f, "Backward{n}"),
            EventCard::DrawPower => f.write_str("DrawPower"),
        }
    }
}

impl FromStr for EventCard {
    type Err = InvalidCard;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let card = if s == "DrawPower" {
            EventCard::DrawPower
        } else if let Some(n) = s.strip_prefix("Forward") {
            EventCard::Forward(n.parse().map_err(|_| InvalidCard(s.to_string()))?)
        } else if let Some(n) = s.strip_prefix("Backward") {
            EventCard::Backward(n.parse().map_err(|_| InvalidCard(s.to_string()))?)
        } else {
            return Err(InvalidCard(s.to_string()));
        };
        if card.is_valid() {
            Ok(card)
        } else {
            Err(InvalidCard(s.to_string()))
        }
    }
}

impl TryFrom<String> for EventCard {
    type Error = InvalidCard;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<EventCard> for String {
    fn from(c: EventCard) -> String {
        c.to_string()
    }
}

/// A power card as held in a hand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PowerKind {
    ExtraTurn,
    DoubleDice,
    FreezePlayer,
}

impl PowerKind {
    pub const ALL: [PowerKind; 3] = [PowerKind::ExtraTurn, PowerKind::DoubleDice, PowerKind::FreezePlayer];
}

/// A power card as played, with its target when it has one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum PowerPlay {
    ExtraTurn,
    DoubleDice,
    FreezePlayer { target: PlayerId },
}

impl PowerPlay {
    pub fn kind(&self) -> PowerKind {
        match self {
            PowerPlay::ExtraTurn => PowerKind::ExtraTurn,
            PowerPlay::DoubleDice => PowerKind::DoubleDice,
            PowerPlay::FreezePlayer { .. } => PowerKind::FreezePlayer,
        }
    }
}

/// A deck with a draw pile and a discard pile. When the draw pile runs out the
/// discard pile is shuffled back in.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deck<T> {
    draw_pile: Vec<T>,
    discard: Vec<T>,
}

impl<T: Copy + Ord> Deck<T> {
    /// Builds a deck holding `weight` copies of each card, shuffled.
    pub fn from_weights<R: Rng + ?Sized>(weights: &BTreeMap<T, u32>, rng: &mut R) -> Self {
        let mut draw_pile: Vec<T> =
            weights.iter().flat_map(|(card, &n)| std::iter::repeat_n(*card, n as usize)).collect();
        draw_pile.shuffle(rng);
        Deck { draw_pile, discard: Vec::new() }
    }

    /// Draws the top card. Returns `None` only when the deck holds no cards at all.
    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<T> {
        if self.draw_pile.is_empty() {
            std::mem::swap(&mut self.draw_pile, &mut self.discard);
            self.draw_pile.shuffle(rng);
        }
        self.draw_pile.pop()
    }

    pub fn discard(&mut self, card: T) {
        self.discard.push(card);
    }

    pub fn len(&self) -> usize {
        self.draw_pile.len() + self.discard.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

//! Drives bots against a running server over WebSocket.
//!
//! Players of game `i` are `g{i}-p{seat}`. Games join one after another (each
//! room must start before the next game's players arrive, so room ids follow
//! game order on a fresh server), then all play at once. A bot acts only when
//! it is first in the pending list of a state it has not acted on yet, which
//! makes the action sequence the same one the in-process driver produces
//! when the server runs with the same base seed.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use log::{debug, warn};
use miboard_core::protocol::{decode, encode, Empty, Frame, JoinZone, Message};
use miboard_core::seed::{derive_seed, room_seed};
use miboard_core::{Phase, PlayerId, RoomId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpStream;
use tokio::sync::oneshot;
use tokio::time::Instant;
use tokio_tungstenite::tungstenite::Message as WsMessage;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use crate::driver::{make_bots, player_ids};
use crate::policy::Bot;
use crate::simulate::SimConfig;

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub const ZONE: &str = "sim";

#[derive(Clone, Debug)]
pub struct LiveOptions {
    /// Chance a bot drops its connection instead of acting, then rejoins.
    pub disconnect_rate: f64,
    /// Chance a bot silently skips a request it should send.
    pub drop_rate: f64,
    pub chaos_seed: u64,
    pub reconnect_delay: Duration,
    /// Wall-clock budget for the whole run.
    pub deadline: Duration,
}

impl Default for LiveOptions {
    fn default() -> Self {
        LiveOptions {
            disconnect_rate: 0.0,
            drop_rate: 0.0,
            chaos_seed: 0,
            reconnect_delay: Duration::from_millis(20),
            deadline: Duration::from_secs(300),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiveGame {
    pub index: usize,
    pub room_id: RoomId,
    pub game_id: u64,
    pub players: Vec<PlayerId>,
    pub winner: Option<PlayerId>,
    pub aborted: bool,
    pub scores: BTreeMap<PlayerId, u32>,
    pub state_hash: String,
    pub requests: u64,
    pub disconnects: u64,
    pub dropped: u64,
}

#[derive(Debug, Error)]
pub enum LiveError {
    #[error("websocket: {0}")]
    Ws(#[from] tokio_tungstenite::tungstenite::Error),
    #[error("server closed the connection of {0}")]
    Closed(PlayerId),
    #[error("deadline passed before game {0} finished")]
    Timeout(usize),
    #[error("game {index}: {message}")]
    Protocol { index: usize, message: String },
}

struct Client {
    ws: Ws,
    seq: u64,
    me: PlayerId,
}

impl Client {
    async fn join(addr: SocketAddr, me: &PlayerId) -> Result<Self, LiveError> {
        let (ws, _) = connect_async(format!("ws://{addr}/ws")).await?;
        let mut c = Client { ws, seq: 0, me: me.clone() };
        c.send(Message::JoinZone(JoinZone { zone: ZONE.into(), player: me.clone() })).await?;
        Ok(c)
    }

    async fn send(&mut self, message: Message) -> Result<(), LiveError> {
        self.seq += 1;
        let text = encode(&Frame::new(self.seq, message)).expect("requests are within size limits");
        self.ws.send(WsMessage::Text(text.into())).await?;
        Ok(())
    }

    async fn recv(&mut self, until: Instant, index: usize) -> Result<Message, LiveError> {
        loop {
            let next = tokio::time::timeout_at(until, self.ws.next()).await.map_err(|_| LiveError::Timeout(index))?;
            match next {
                Some(Ok(WsMessage::Text(t))) => {
                    return decode(t.as_bytes())
                        .map(|f| f.message)
                        .map_err(|e| LiveError::Protocol { index, message: e.to_string() })
                }
                Some(Ok(WsMessage::Close(_))) | None => return Err(LiveError::Closed(self.me.clone())),
                Some(Err(e)) => return Err(e.into()),
                Some(Ok(_)) => {}
            }
        }
    }
}

/// What one seat saw by the end of its game.
struct SeatResult {
    game: LiveGame,
}

struct Seat {
    index: usize,
    addr: SocketAddr,
    client: Client,
    bot: Bot,
    chaos: ChaCha8Rng,
    opts: LiveOptions,
    until: Instant,
    started: Option<oneshot::Sender<()>>,
}

impl Seat {
    async fn run(mut self) -> Result<SeatResult, LiveError> {
        let mut last_acted = 0;
        let (mut requests, mut disconnects, mut dropped) = (0, 0, 0);
        let mut room = (RoomId(0), 0);
        loop {
            let message = self.client.recv(self.until, self.index).await?;
            match message {
                Message::StateSync(s) => {
                    if let Some(tx) = self.started.take() {
                        let _ = tx.send(());
                    }
                    room = (s.room_id, s.game_id);
                    let view = s.view;
                    if view.phase == Phase::GameOver {
                        let game = LiveGame {
                            index: self.index,
                            room_id: s.room_id,
                            game_id: s.game_id,
                            players: view.players.iter().map(|p| p.id.clone()).collect(),
                            winner: view.winner.clone(),
                            aborted: view.aborted,
                            scores: view.players.iter().map(|p| (p.id.clone(), p.score)).collect(),
                            state_hash: s.state_hash,
                            requests,
                            disconnects,
                            dropped,
                        };
                        return Ok(SeatResult { game });
                    }
                    if view.pending.first() != Some(&self.client.me) || s.event_seq <= last_acted {
                        continue;
                    }
                    if self.chaos.gen_bool(self.opts.disconnect_rate) {
                        disconnects += 1;
                        debug!("{} drops its connection", self.client.me);
                        let _ = self.client.ws.close(None).await;
                        tokio::time::sleep(self.opts.reconnect_delay).await;
                        self.client = Client::join(self.addr, &self.client.me).await?;
                        continue;
                    }
                    last_acted = s.event_seq;
                    let request = self.bot.decide(&view);
                    if self.chaos.gen_bool(self.opts.drop_rate) {
                        dropped += 1;
                        continue;
                    }
                    requests += 1;
                    self.client.send(request).await?;
                }
                Message::GameOver(g) => {
                    let game = LiveGame {
                        index: self.index,
                        room_id: room.0,
                        game_id: room.1,
                        players: g.scores.keys().cloned().collect(),
                        winner: g.winner,
                        aborted: g.aborted,
                        scores: g.scores,
                        state_hash: g.state_hash,
                        requests,
                        disconnects,
                        dropped,
                    };
                    return Ok(SeatResult { game });
                }
                Message::Error(e) => warn!("{} got {}: {}", self.client.me, e.kind, e.message),
                _ => {}
            }
        }
    }
}

/// Plays `config.games` games against the server at `addr`. Bots seed
/// themselves from `room_seed(config.seed, room_id)`, so `config.seed` should
/// be the server's base seed.
pub async fn live_drive(addr: SocketAddr, config: &SimConfig, opts: &LiveOptions) -> Result<Vec<LiveGame>, LiveError> {
    let until = Instant::now() + opts.deadline;
    let mut games = Vec::new();
    for index in 0..config.games {
        let ids = player_ids(index, config.players);
        let mut clients = Vec::new();
        let mut room_id = None;
        for id in &ids {
            let mut c = Client::join(addr, id).await?;
            loop {
                match c.recv(until, index).await? {
                    Message::RoomAssigned(r) if r.members.contains(id) => {
                        if room_id.is_some_and(|prev| prev != r.room_id) {
                            return Err(LiveError::Protocol { index, message: "players split across rooms".into() });
                        }
                        room_id = Some(r.room_id);
                        break;
                    }
                    Message::Error(e) => return Err(LiveError::Protocol { index, message: e.message }),
                    _ => {}
                }
            }
            clients.push(c);
        }
        let room_id = room_id.expect("at least one player");
        let seed = room_seed(config.seed, room_id.0);
        let bots = make_bots(&config.policy, seed, ids.len());
        clients[0].send(Message::BeginGame(Empty {})).await?;
        let (tx, rx) = oneshot::channel();
        let mut tx = Some(tx);
        let mut handles = Vec::new();
        for (seat, (client, bot)) in clients.into_iter().zip(bots).enumerate() {
            let chaos = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(opts.chaos_seed, index as u64), seat as u64));
            let s = Seat {
                index,
                addr,
                client,
                bot,
                chaos,
                opts: opts.clone(),
                until,
                started: if seat == 0 { tx.take() } else { None },
            };
            handles.push(tokio::spawn(s.run()));
        }
        games.push((ids, handles));
        // The next game must not join before this room has started.
        let _ = tokio::time::timeout_at(until, rx).await.map_err(|_| LiveError::Timeout(index))?;
    }

    let mut out = Vec::new();
    for (index, (ids, handles)) in games.into_iter().enumerate() {
        let mut result: Option<LiveGame> = None;
        let mut totals = (0, 0, 0);
        for h in handles {
            let seat = h.await.map_err(|e| LiveError::Protocol { index, message: e.to_string() })??;
            let g = seat.game;
            totals = (totals.0 + g.requests, totals.1 + g.disconnects, totals.2 + g.dropped);
            match &result {
                Some(r) if r.state_hash != g.state_hash => {
                    return Err(LiveError::Protocol { index, message: "seats disagree on the final state".into() })
                }
                Some(_) => {}
                None => result = Some(g),
            }
        }
        let mut game = result.expect("every game has seats");
        (game.requests, game.disconnects, game.dropped) = totals;
        game.players = ids;
        out.push(game);
    }
    Ok(out)
}

//! Network hosting: one lobby executor, one executor per started room, and
//! one task per WebSocket connection. Executors talk only through channels.

use std::collections::{BTreeMap, HashMap};
use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{self, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use log::{debug, error, info, warn};
use miboard_core::corpus::CorpusError;
use miboard_core::lobby::{Lobby, LobbyError};
use miboard_core::protocol::{
    decode, encode, Chat, CodecError, ErrorPayload, Frame, JoinZone, Message, RoomAssigned, MAX_FRAME_BYTES,
};
use miboard_core::seed::room_seed;
use miboard_core::{Corpus, GameConfig, PlayerId, RoomId};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;

use crate::config::ServerConfig;
use crate::event_log::{now_ms, FileLog, SharedSink};
use crate::room::{is_room_request, Outbound, RoomRuntime, Timers};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("opening event log {path}: {source}")]
    Log { path: String, source: io::Error },
    #[error("binding {addr}: {source}")]
    Bind { addr: SocketAddr, source: io::Error },
    #[error("serving: {0}")]
    Serve(io::Error),
}

impl ServerError {
    pub fn kind(&self) -> &'static str {
        match self {
            ServerError::Corpus(CorpusError::Empty) => "emptyCorpus",
            ServerError::Corpus(_) => "corpus",
            ServerError::Log { .. } => "log",
            ServerError::Bind { .. } => "bind",
            ServerError::Serve(_) => "serve",
        }
    }
}

/// Shared read-only context plus the log sink.
#[derive(Clone)]
pub struct Context {
    pub corpus: Arc<Corpus>,
    pub sink: SharedSink,
    pub game: GameConfig,
    pub timers: Timers,
    pub tick: Duration,
    pub base_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RoomSummary {
    pub room_id: RoomId,
    pub zone: String,
    pub member_count: usize,
    pub started: bool,
}

enum ConnEvent {
    Send(Message),
    Seated(RoomTx),
    Close,
}

type ConnTx = mpsc::UnboundedSender<ConnEvent>;
type RoomTx = mpsc::UnboundedSender<RoomCmd>;
type LobbyTx = mpsc::UnboundedSender<LobbyCmd>;

#[derive(Clone)]
struct Conn {
    id: u64,
    tx: ConnTx,
}

impl Conn {
    fn send(&self, message: Message) {
        let _ = self.tx.send(ConnEvent::Send(message));
    }
}

enum LobbyCmd {
    Join { join: JoinZone, conn: Conn, reply: oneshot::Sender<Result<(), ErrorPayload>> },
    Begin { player: PlayerId },
    Chat { player: PlayerId, chat: Chat },
    Disconnect { player: PlayerId, conn_id: u64 },
    RoomFinished { room_id: RoomId },
    List { reply: oneshot::Sender<Vec<RoomSummary>> },
}

enum RoomCmd {
    Request { player: PlayerId, message: Message },
    Disconnect { player: PlayerId, conn_id: u64 },
    Reconnect { player: PlayerId, conn: Conn },
}

fn lobby_error(e: LobbyError) -> ErrorPayload {
    ErrorPayload::new(e.code(), e)
}

struct LobbyExec {
    ctx: Context,
    lobby: Lobby,
    /// Connections of members of rooms that have not started.
    waiting: HashMap<PlayerId, Conn>,
    rooms: HashMap<RoomId, RoomTx>,
    self_tx: LobbyTx,
}

impl LobbyExec {
    async fn run(mut self, mut rx: mpsc::UnboundedReceiver<LobbyCmd>) {
        while let Some(cmd) = rx.recv().await {
            match cmd {
                LobbyCmd::Join { join, conn, reply } => {
                    let _ = reply.send(self.join(join, conn));
                }
                LobbyCmd::Begin { player } => self.begin(&player),
                LobbyCmd::Chat { player, chat } => self.chat(&player, chat),
                LobbyCmd::Disconnect { player, conn_id } => self.disconnect(&player, conn_id),
                LobbyCmd::RoomFinished { room_id } => {
                    self.rooms.remove(&room_id);
                    self.lobby.close_room(room_id);
                    info!("room {room_id} closed");
                }
                LobbyCmd::List { reply } => {
                    let rooms = self
                        .lobby
                        .rooms()
                        .map(|r| RoomSummary {
                            room_id: r.room_id,
                            zone: r.zone_id.clone(),
                            member_count: r.members.len(),
                            started: r.started,
                        })
                        .collect();
                    let _ = reply.send(rooms);
                }
            }
        }
    }

    fn join(&mut self, join: JoinZone, conn: Conn) -> Result<(), ErrorPayload> {
        let player = join.player;
        if let Some(room) = self.lobby.room_of(&player) {
            let room_id = room.room_id;
            // Returning to a started game.
            if let Some(room_tx) = self.rooms.get(&room_id) {
                let _ = conn.tx.send(ConnEvent::Seated(room_tx.clone()));
                let _ = room_tx.send(RoomCmd::Reconnect { player, conn });
                return Ok(());
            }
            return Err(lobby_error(LobbyError::DuplicateMembership(player, room_id)));
        }
        let room_id = self.lobby.find_or_create_room(&join.zone, player.clone()).map_err(lobby_error)?;
        self.waiting.insert(player, conn);
        self.announce(room_id);
        Ok(())
    }

    fn announce(&self, room_id: RoomId) {
        let Some(room) = self.lobby.room(room_id) else { return };
        let msg = Message::RoomAssigned(RoomAssigned {
            room_id,
            zone: room.zone_id.clone(),
            members: room.members.clone(),
            started: room.started,
        });
        for m in &room.members {
            if let Some(c) = self.waiting.get(m) {
                c.send(msg.clone());
            }
        }
    }

    fn begin(&mut self, player: &PlayerId) {
        let reply_err = |this: &Self, e: ErrorPayload| {
            if let Some(c) = this.waiting.get(player) {
                c.send(Message::Error(e));
            }
        };
        let Some(room_id) = self.lobby.room_of(player).map(|r| r.room_id) else {
            return reply_err(self, lobby_error(LobbyError::NotInRoom(player.clone())));
        };
        let roster = match self.lobby.begin_game(room_id, player) {
            Ok(r) => r,
            Err(e) => return reply_err(self, lobby_error(e)),
        };
        let conns: BTreeMap<PlayerId, Conn> =
            roster.iter().filter_map(|p| self.waiting.remove(p).map(|c| (p.clone(), c))).collect();
        self.announce_to(&conns, room_id);
        let seed = room_seed(self.ctx.base_seed, room_id.0);
        let started = RoomRuntime::start(
            room_id,
            roster,
            &self.ctx.game,
            seed,
            self.ctx.corpus.clone(),
            self.ctx.sink.clone(),
            self.ctx.timers,
            now_ms(),
        );
        let (runtime, out) = match started {
            Ok(x) => x,
            Err(e) => {
                error!("room {room_id}: {e}");
                for c in conns.values() {
                    c.send(Message::Error(ErrorPayload::new("startFailed", &e)));
                }
                self.lobby.close_room(room_id);
                return;
            }
        };
        info!("room {room_id} started game {} with seed {seed}", runtime.game_id());
        let (tx, rx) = mpsc::unbounded_channel();
        for c in conns.values() {
            let _ = c.tx.send(ConnEvent::Seated(tx.clone()));
        }
        self.rooms.insert(room_id, tx);
        let exec = RoomExec { runtime, conns, tick: self.ctx.tick, lobby: self.self_tx.clone() };
        exec.deliver(out);
        tokio::spawn(exec.run(rx));
    }

    fn announce_to(&self, conns: &BTreeMap<PlayerId, Conn>, room_id: RoomId) {
        if let Some(room) = self.lobby.room(room_id) {
            let msg = Message::RoomAssigned(RoomAssigned {
                room_id,
                zone: room.zone_id.clone(),
                members: room.members.clone(),
                started: room.started,
            });
            for c in conns.values() {
                c.send(msg.clone());
            }
        }
    }

    fn chat(&self, player: &PlayerId, chat: Chat) {
        let Some(room) = self.lobby.room_of(player) else { return };
        let relayed = Message::Chat(Chat { from: Some(player.clone()), to: chat.to.clone(), text: chat.text });
        for m in &room.members {
            let addressed = chat.to.as_ref().is_none_or(|to| m == player || to.contains(m));
            if let (true, Some(c)) = (addressed, self.waiting.get(m)) {
                c.send(relayed.clone());
            }
        }
    }

    fn disconnect(&mut self, player: &PlayerId, conn_id: u64) {
        if self.waiting.get(player).is_none_or(|c| c.id != conn_id) {
            return;
        }
        self.waiting.remove(player);
        if let Ok(room_id) = self.lobby.leave_room(player) {
            self.announce(room_id);
        }
    }
}

struct RoomExec {
    runtime: RoomRuntime,
    conns: BTreeMap<PlayerId, Conn>,
    tick: Duration,
    lobby: LobbyTx,
}

impl RoomExec {
    fn deliver(&self, out: Vec<Outbound>) {
        for o in out {
            if let Some(c) = self.conns.get(&o.to) {
                c.send(o.message);
            }
        }
    }

    async fn run(mut self, mut rx: mpsc::UnboundedReceiver<RoomCmd>) {
        let room_id = self.runtime.room_id();
        let mut ticker = tokio::time::interval(self.tick);
        ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        loop {
            let result = tokio::select! {
                cmd = rx.recv() => match cmd {
                    Some(cmd) => self.command(cmd),
                    None => break,
                },
                _ = ticker.tick() => self.runtime.tick(now_ms()),
            };
            match result {
                Ok(out) => self.deliver(out),
                Err(e) => {
                    error!("room {room_id}: {e}; closing room");
                    for c in self.conns.values() {
                        c.send(Message::Error(ErrorPayload::new("internal", &e)));
                    }
                    break;
                }
            }
            if self.runtime.state().is_over() && self.runtime.connected_count() == 0 {
                break;
            }
        }
        for c in self.conns.values() {
            let _ = c.tx.send(ConnEvent::Close);
        }
        let _ = self.lobby.send(LobbyCmd::RoomFinished { room_id });
    }

    fn command(&mut self, cmd: RoomCmd) -> Result<Vec<Outbound>, crate::room::RoomError> {
        let now = now_ms();
        match cmd {
            RoomCmd::Request { player, message } => self.runtime.handle(&player, &message, now),
            RoomCmd::Disconnect { player, conn_id } => {
                if self.conns.get(&player).is_none_or(|c| c.id != conn_id) {
                    return Ok(Vec::new());
                }
                self.conns.remove(&player);
                self.runtime.disconnect(&player, now)
            }
            RoomCmd::Reconnect { player, conn } => {
                if let Some(old) = self.conns.insert(player.clone(), conn) {
                    let _ = old.tx.send(ConnEvent::Close);
                }
                self.runtime.reconnect(&player, now)
            }
        }
    }
}

#[derive(Clone)]
struct AppState {
    lobby: LobbyTx,
    texts: usize,
    next_conn: Arc<AtomicU64>,
}

pub fn router(ctx: Context) -> Router {
    let (tx, rx) = mpsc::unbounded_channel();
    let texts = ctx.corpus.len();
    let exec =
        LobbyExec { ctx, lobby: Lobby::new(), waiting: HashMap::new(), rooms: HashMap::new(), self_tx: tx.clone() };
    tokio::spawn(exec.run(rx));
    let state = AppState { lobby: tx, texts, next_conn: Arc::new(AtomicU64::new(1)) };
    Router::new()
        .route("/healthz", get(healthz))
        .route("/rooms", get(rooms))
        .route("/ws", get(ws_upgrade))
        .with_state(state)
}

async fn healthz(State(app): State<AppState>) -> impl IntoResponse {
    Json(serde_json::json!({ "status": "ready", "texts": app.texts }))
}

async fn rooms(State(app): State<AppState>) -> impl IntoResponse {
    let (reply, rx) = oneshot::channel();
    let _ = app.lobby.send(LobbyCmd::List { reply });
    Json(rx.await.unwrap_or_default())
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(app): State<AppState>) -> impl IntoResponse {
    // Leave headroom so oversized frames reach the codec and get a typed error.
    ws.max_message_size(MAX_FRAME_BYTES * 4).on_upgrade(move |socket| connection(socket, app))
}

async fn connection(mut socket: WebSocket, app: AppState) {
    let (tx, mut rx) = mpsc::unbounded_channel();
    let conn = Conn { id: app.next_conn.fetch_add(1, Ordering::Relaxed), tx };
    let mut out_seq = 0u64;
    let mut last_in_seq: Option<u64> = None;
    let mut player: Option<PlayerId> = None;
    let mut room: Option<RoomTx> = None;

    macro_rules! send {
        ($msg:expr) => {{
            out_seq += 1;
            match encode(&Frame::new(out_seq, $msg)) {
                Ok(text) => socket.send(ws::Message::Text(text.into())).await.is_ok(),
                Err(e) => {
                    warn!("dropping unencodable frame: {e}");
                    true
                }
            }
        }};
    }

    loop {
        tokio::select! {
            event = rx.recv() => match event {
                Some(ConnEvent::Send(m)) => if !send!(m) { break },
                Some(ConnEvent::Seated(r)) => room = Some(r),
                Some(ConnEvent::Close) | None => break,
            },
            incoming = socket.recv() => {
                let bytes = match incoming {
                    Some(Ok(ws::Message::Text(t))) => t.as_bytes().to_vec(),
                    Some(Ok(ws::Message::Binary(b))) => b.to_vec(),
                    Some(Ok(ws::Message::Ping(_) | ws::Message::Pong(_))) => continue,
                    Some(Ok(ws::Message::Close(_))) | None => break,
                    Some(Err(e)) => {
                        debug!("connection {}: {e}", conn.id);
                        break;
                    }
                };
                let frame = match decode(&bytes) {
                    Ok(f) => f,
                    Err(e @ CodecError::VersionMismatch(_)) => {
                        send!(Message::Error(ErrorPayload::new(e.kind(), &e)));
                        break;
                    }
                    Err(e) => {
                        if !send!(Message::Error(ErrorPayload::new(e.kind(), &e))) { break }
                        continue;
                    }
                };
                if last_in_seq.is_some_and(|last| frame.seq <= last) {
                    let e = ErrorPayload::new("seqNotIncreasing", format!("seq {} after {}", frame.seq, last_in_seq.unwrap_or(0)));
                    if !send!(Message::Error(e)) { break }
                    continue;
                }
                last_in_seq = Some(frame.seq);
                let reply = route(frame.message, &app, &conn, &mut player, room.as_ref()).await;
                if let Some(m) = reply {
                    if !send!(m) { break }
                }
            }
        }
    }

    if let Some(p) = player {
        match room {
            Some(r) => {
                let _ = r.send(RoomCmd::Disconnect { player: p, conn_id: conn.id });
            }
            None => {
                let _ = app.lobby.send(LobbyCmd::Disconnect { player: p, conn_id: conn.id });
            }
        }
    }
    let _ = socket.send(ws::Message::Close(None)).await;
}

/// Forwards a decoded request; returns an immediate reply when there is one.
async fn route(
    message: Message,
    app: &AppState,
    conn: &Conn,
    player: &mut Option<PlayerId>,
    room: Option<&RoomTx>,
) -> Option<Message> {
    let err = |kind: &str, msg: &str| Some(Message::Error(ErrorPayload::new(kind, msg)));
    match (message, player.as_ref()) {
        (Message::Ping(p), _) => Some(Message::Pong(p)),
        (Message::JoinZone(_), Some(_)) => err("alreadyJoined", "this connection already joined"),
        (Message::JoinZone(join), None) => {
            let who = join.player.clone();
            let (reply, rx) = oneshot::channel();
            let _ = app.lobby.send(LobbyCmd::Join { join, conn: conn.clone(), reply });
            match rx.await {
                Ok(Ok(())) => {
                    *player = Some(who);
                    None
                }
                Ok(Err(e)) => Some(Message::Error(e)),
                Err(_) => err("internal", "lobby unavailable"),
            }
        }
        (_, None) => err("notJoined", "send JoinZone first"),
        (m, Some(p)) if is_room_request(m.code()) => {
            match room {
                Some(r) => {
                    let _ = r.send(RoomCmd::Request { player: p.clone(), message: m });
                }
                None => match m {
                    Message::BeginGame(_) => {
                        let _ = app.lobby.send(LobbyCmd::Begin { player: p.clone() });
                    }
                    Message::Chat(chat) => {
                        let _ = app.lobby.send(LobbyCmd::Chat { player: p.clone(), chat });
                    }
                    _ => return err("wrongPhase", "the game has not started"),
                },
            }
            None
        }
        (m, Some(_)) => Some(Message::Error(ErrorPayload::new(
            "unexpectedCode",
            format!("{} is sent by the server only", m.code()),
        ))),
    }
}

/// A running server.
pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    join: JoinHandle<io::Result<()>>,
}

impl ServerHandle {
    pub async fn shutdown(mut self) -> io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.join.await.unwrap_or_else(|e| Err(io::Error::other(e)))
    }

    /// Serves until the process is stopped.
    pub async fn wait(self) -> io::Result<()> {
        let _keep = self.shutdown;
        self.join.await.unwrap_or_else(|e| Err(io::Error::other(e)))
    }
}

/// Loads the corpus, opens the log and binds the listener.
pub async fn start(config: &ServerConfig) -> Result<ServerHandle, ServerError> {
    let corpus = Corpus::load(&config.corpus)?;
    let sink = FileLog::open(&config.log)
        .map_err(|source| ServerError::Log { path: config.log.display().to_string(), source })?;
    let base_seed = config.seed.unwrap_or_else(rand::random);
    info!("loaded {} texts; base seed {base_seed}", corpus.len());
    let ctx = Context {
        corpus: Arc::new(corpus),
        sink: Arc::new(sink),
        game: config.game.clone(),
        timers: config.timers,
        tick: config.tick,
        base_seed,
    };
    let listener =
        TcpListener::bind(config.listen).await.map_err(|source| ServerError::Bind { addr: config.listen, source })?;
    serve(listener, ctx)
}

pub fn serve(listener: TcpListener, ctx: Context) -> Result<ServerHandle, ServerError> {
    let addr = listener.local_addr().map_err(ServerError::Serve)?;
    let (shutdown, signal) = oneshot::channel::<()>();
    let app = router(ctx);
    let join = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = signal.await;
            })
            .await
    });
    info!("listening on {addr}");
    Ok(ServerHandle { addr, shutdown: Some(shutdown), join })
}

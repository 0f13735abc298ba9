use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use miboard_core::protocol::{decode, encode, Empty, Frame, JoinZone, Message, MessageCode, Ping};
use miboard_core::{Corpus, GameConfig, PlayerId};
use miboard_server::{serve, Context, MemoryLog, ServerConfig, Timers};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio_tungstenite::tungstenite::Message as WsMessage;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

async fn boot() -> (std::net::SocketAddr, Arc<MemoryLog>) {
    let log = Arc::new(MemoryLog::new());
    let ctx = Context {
        corpus: Arc::new(Corpus::load(corpus_dir()).unwrap()),
        sink: log.clone(),
        game: GameConfig::default(),
        timers: Timers::default(),
        tick: Duration::from_millis(50),
        base_seed: 1,
    };
    let handle = serve(TcpListener::bind("127.0.0.1:0").await.unwrap(), ctx).unwrap();
    let addr = handle.addr;
    tokio::spawn(handle.wait());
    (addr, log)
}

async fn http_get(addr: std::net::SocketAddr, path: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).await.unwrap();
    s.write_all(format!("GET {path} HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").as_bytes()).await.unwrap();
    let mut raw = String::new();
    s.read_to_string(&mut raw).await.unwrap();
    let status = raw[9..12].parse().unwrap();
    let body = raw.split("\r\n\r\n").nth(1).unwrap_or_default().to_string();
    (status, body)
}

struct Client {
    ws: Ws,
    seq: u64,
}

impl Client {
    async fn connect(addr: std::net::SocketAddr) -> Self {
        let (ws, _) = connect_async(format!("ws://{addr}/ws")).await.unwrap();
        Client { ws, seq: 0 }
    }

    async fn send(&mut self, m: Message) {
        self.seq += 1;
        self.send_raw(encode(&Frame::new(self.seq, m)).unwrap()).await;
    }

    async fn send_raw(&mut self, text: String) {
        self.ws.send(WsMessage::Text(text.into())).await.unwrap();
    }

    /// Next frame, or `None` once the server closed the connection.
    async fn recv(&mut self) -> Option<Frame> {
        loop {
            let next = tokio::time::timeout(Duration::from_secs(5), self.ws.next()).await.expect("frame in time");
            match next {
                Some(Ok(WsMessage::Text(t))) => return Some(decode(t.as_bytes()).unwrap()),
                Some(Ok(WsMessage::Close(_))) | None | Some(Err(_)) => return None,
                Some(Ok(_)) => continue,
            }
        }
    }

    async fn until(&mut self, code: MessageCode) -> Frame {
        loop {
            let f = self.recv().await.expect("connection open");
            if f.message.code() == code {
                return f;
            }
        }
    }
}

fn join(name: &str) -> Message {
    Message::JoinZone(JoinZone { zone: "default".into(), player: PlayerId::new(name) })
}

#[tokio::test]
async fn health_and_room_listing() {
    let (addr, _) = boot().await;
    let (status, body) = http_get(addr, "/healthz").await;
    assert_eq!(status, 200);
    assert!(body.contains("\"ready\""));

    let mut a = Client::connect(addr).await;
    a.send(join("ann")).await;
    a.until(MessageCode::RoomAssigned).await;
    let mut b = Client::connect(addr).await;
    b.send(join("bob")).await;
    b.until(MessageCode::RoomAssigned).await;
    let (_, body) = http_get(addr, "/rooms").await;
    let rooms: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(rooms[0]["roomId"], 1);
    assert_eq!(rooms[0]["memberCount"], 2);
    assert_eq!(rooms[0]["started"], false);
}

#[tokio::test]
async fn three_players_begin_and_sync() {
    let (addr, log) = boot().await;
    let mut clients = Vec::new();
    for name in ["ann", "bob", "cat"] {
        let mut c = Client::connect(addr).await;
        c.send(join(name)).await;
        c.until(MessageCode::RoomAssigned).await;
        clients.push(c);
    }
    clients[1].send(Message::BeginGame(Empty {})).await;
    for c in &mut clients {
        let f = c.until(MessageCode::StateSync).await;
        let Message::StateSync(s) = f.message else { unreachable!() };
        assert_eq!(s.view.phase, miboard_core::Phase::ReaderComposing);
        let ev = log.events().into_iter().find(|e| e.seq == s.event_seq && e.game_id == s.game_id).unwrap();
        assert_eq!(ev.state_hash, s.state_hash);
    }
    // A fourth player cannot enter a started room.
    let mut d = Client::connect(addr).await;
    d.send(join("dan")).await;
    let Message::RoomAssigned(r) = d.until(MessageCode::RoomAssigned).await.message else { unreachable!() };
    assert_eq!(r.room_id.0, 2);

    // Guesser reconnect gets a resync.
    drop(clients.pop());
    tokio::time::sleep(Duration::from_millis(100)).await;
    let mut again = Client::connect(addr).await;
    again.send(join("cat")).await;
    let Message::StateSync(s) = again.until(MessageCode::StateSync).await.message else { unreachable!() };
    assert_eq!(s.view.me, PlayerId::new("cat"));
}

#[tokio::test]
async fn protocol_errors() {
    let (addr, _) = boot().await;
    let mut c = Client::connect(addr).await;
    c.send(Message::Roll(Empty {})).await;
    let Message::Error(e) = c.recv().await.unwrap().message else { panic!() };
    assert_eq!(e.kind, "notJoined");
    c.send_raw(r#"{"v":1,"seq":5,"code":"Warp","payload":{}}"#.into()).await;
    let Message::Error(e) = c.recv().await.unwrap().message else { panic!() };
    assert_eq!(e.kind, "unknownCode");
    c.send_raw(r#"{"v":1,"seq":5,"code":"Ping","payload":{"nonce":1}}"#.into()).await;
    assert_eq!(c.recv().await.unwrap().message, Message::Pong(Ping { nonce: 1 }));
    c.send_raw(r#"{"v":1,"seq":5,"code":"Ping","payload":{"nonce":2}}"#.into()).await;
    let Message::Error(e) = c.recv().await.unwrap().message else { panic!() };
    assert_eq!(e.kind, "seqNotIncreasing");
    c.send_raw(r#"{"v":1,"seq":6,"code":"Ping","payload":{"nonce":4}}"#.into()).await;
    assert_eq!(c.recv().await.unwrap().message, Message::Pong(Ping { nonce: 4 }));
    c.send_raw(format!(r#"{{"v":1,"seq":7,"code":"Chat","payload":{{"text":"{}"}}}}"#, "x".repeat(70_000))).await;
    let Message::Error(e) = c.recv().await.unwrap().message else { panic!() };
    assert_eq!(e.kind, "oversize");
    c.send_raw(r#"{"v":9,"seq":8,"code":"Ping","payload":{"nonce":1}}"#.into()).await;
    let Message::Error(e) = c.recv().await.unwrap().message else { panic!() };
    assert_eq!(e.kind, "versionMismatch");
    assert!(c.recv().await.is_none());
}

#[tokio::test]
async fn empty_corpus_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ServerConfig::new("127.0.0.1:0".parse().unwrap(), dir.path(), dir.path().join("log.jsonl"));
    config.seed = Some(1);
    let err = miboard_server::start(&config).await.err().expect("boot fails");
    assert_eq!(err.kind(), "emptyCorpus");
}

#[tokio::test]
async fn boots_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServerConfig::new("127.0.0.1:0".parse().unwrap(), corpus_dir(), dir.path().join("log.jsonl"));
    let handle = miboard_server::start(&config).await.unwrap();
    let (status, _) = http_get(handle.addr, "/healthz").await;
    assert_eq!(status, 200);
    handle.shutdown().await.unwrap();
}

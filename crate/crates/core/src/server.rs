//! WebSocket transport for [`crate::service`].
//!
//! Each connection attaches to a session (new, or resumed with `?id=`).
//! Frames for one session are handled one at a time under that session's
//! lock; different sessions run independently.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use thiserror::Error;
use tokio::net::TcpListener;

use crate::service::{handle_message, ClientMessage, ServerMessage, Session};
use crate::tasks::TaskSpec;

pub const DEFAULT_PORT: u16 = 8765;
pub const PORT_ENV: &str = "GRIDBLOCK_PORT";
pub const SESSION_PATH: &str = "/session";
pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PortError {
    #[error("{PORT_ENV}={0:?} is not a valid port")]
    BadEnv(String),
}

/// Port from the flag, then `GRIDBLOCK_PORT`, then the default.
pub fn resolve_port(flag: Option<u16>) -> Result<u16, PortError> {
    if let Some(p) = flag {
        return Ok(p);
    }
    match std::env::var(PORT_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| PortError::BadEnv(v)),
        Err(_) => Ok(DEFAULT_PORT),
    }
}

struct Slot {
    session: Arc<tokio::sync::Mutex<Session>>,
    last_used: Instant,
}

/// Session table shared by all connections.
#[derive(Default)]
pub struct SessionTable {
    slots: Mutex<HashMap<String, Slot>>,
}

impl SessionTable {
    /// Returns the session for `id`, creating it when absent or expired.
    fn attach(&self, id: Option<String>) -> (String, Arc<tokio::sync::Mutex<Session>>) {
        let id = id
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
        let mut slots = self.slots.lock().expect("session table poisoned");
        let slot = slots.entry(id.clone()).or_insert_with(|| Slot {
            session: Arc::new(tokio::sync::Mutex::new(Session::new(id.clone()))),
            last_used: Instant::now(),
        });
        slot.last_used = Instant::now();
        (id, slot.session.clone())
    }

    fn touch(&self, id: &str) {
        if let Some(s) = self
            .slots
            .lock()
            .expect("session table poisoned")
            .get_mut(id)
        {
            s.last_used = Instant::now();
        }
    }

    /// Drops sessions idle for longer than `idle`. Returns how many went.
    pub fn expire(&self, idle: Duration) -> usize {
        let mut slots = self.slots.lock().expect("session table poisoned");
        let before = slots.len();
        slots.retain(|_, s| s.last_used.elapsed() <= idle || Arc::strong_count(&s.session) > 1);
        before - slots.len()
    }

    pub fn len(&self) -> usize {
        self.slots.lock().expect("session table poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone)]
pub struct AppState {
    pub tasks: Arc<Vec<TaskSpec>>,
    pub sessions: Arc<SessionTable>,
}

impl AppState {
    pub fn new(tasks: Vec<TaskSpec>) -> Self {
        AppState {
            tasks: Arc::new(tasks),
            sessions: Arc::new(SessionTable::default()),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route(SESSION_PATH, get(upgrade))
        .with_state(state)
}

async fn upgrade(
    ws: WebSocketUpgrade,
    Query(q): Query<HashMap<String, String>>,
    State(state): State<AppState>,
) -> Response {
    let id = q.get("id").cloned();
    ws.on_upgrade(move |socket| connection(socket, state, id))
}

async fn connection(socket: WebSocket, state: AppState, id: Option<String>) {
    let (id, session) = state.sessions.attach(id);
    let (mut tx, mut rx) = socket.split();
    let hello = ServerMessage::Session {
        session_id: id.clone(),
    };
    if tx
        .send(Message::Text(hello.to_text().into()))
        .await
        .is_err()
    {
        return;
    }
    while let Some(Ok(msg)) = rx.next().await {
        let text = match msg {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        let replies = match ClientMessage::from_text(&text) {
            Ok(m) => {
                let mut s = session.lock().await;
                handle_message(&mut s, &state.tasks, m)
            }
            Err(e) => vec![e],
        };
        state.sessions.touch(&id);
        for r in replies {
            if tx.send(Message::Text(r.to_text().into())).await.is_err() {
                return;
            }
        }
    }
}

/// Serves on an already-bound listener, expiring idle sessions in the
/// background.
pub async fn serve_on(
    listener: TcpListener,
    state: AppState,
    idle: Duration,
) -> std::io::Result<()> {
    let sessions = state.sessions.clone();
    let sweep = (idle / 4).clamp(Duration::from_millis(10), Duration::from_secs(60));
    let reaper = tokio::spawn(async move {
        let mut tick = tokio::time::interval(sweep);
        loop {
            tick.tick().await;
            sessions.expire(idle);
        }
    });
    let r = axum::serve(listener, router(state)).await;
    reaper.abort();
    r
}

/// Binds `127.0.0.1:port` and serves until the process ends.
pub async fn serve(port: u16, tasks: Vec<TaskSpec>) -> std::io::Result<()> {
    let listener = TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], port))).await?;
    eprintln!("listening on ws://{}{SESSION_PATH}", listener.local_addr()?);
    serve_on(listener, AppState::new(tasks), DEFAULT_IDLE_TIMEOUT).await
}

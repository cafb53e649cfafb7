use std::net::SocketAddr;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use gridblock::server::{serve_on, AppState};
use gridblock::service::{ClientMessage, ServerMessage};
use gridblock::tasks::builtin_tasks;
use tokio::net::{TcpListener, TcpStream};
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

/// Starts the service on an ephemeral local port.
pub async fn start_server() -> SocketAddr {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve_on(
        listener,
        AppState::new(builtin_tasks()),
        Duration::from_secs(60),
    ));
    addr
}

pub struct WsClient {
    stream: WebSocketStream<MaybeTlsStream<TcpStream>>,
    pub session_id: String,
}

impl WsClient {
    pub async fn connect(addr: SocketAddr, resume: Option<&str>) -> Self {
        let url = match resume {
            Some(id) => format!("ws://{addr}/session?id={id}"),
            None => format!("ws://{addr}/session"),
        };
        let (stream, _) = connect_async(url).await.expect("websocket connects");
        let mut c = WsClient {
            stream,
            session_id: String::new(),
        };
        match c.recv().await {
            ServerMessage::Session { session_id } => c.session_id = session_id,
            other => panic!("expected SESSION frame, got {other:?}"),
        }
        c
    }

    pub async fn send_raw(&mut self, text: &str) {
        self.stream.send(Message::text(text)).await.unwrap();
    }

    pub async fn send(&mut self, m: &ClientMessage) {
        self.send_raw(&m.to_text()).await;
    }

    pub async fn recv_text(&mut self) -> String {
        loop {
            let msg = tokio::time::timeout(Duration::from_secs(5), self.stream.next())
                .await
                .expect("reply within 5s")
                .expect("stream open")
                .expect("frame");
            if let Message::Text(t) = msg {
                return t.to_string();
            }
        }
    }

    pub async fn recv(&mut self) -> ServerMessage {
        serde_json::from_str(&self.recv_text().await).expect("server frame parses")
    }

    pub async fn request(&mut self, m: &ClientMessage) -> ServerMessage {
        self.send(m).await;
        self.recv().await
    }
}

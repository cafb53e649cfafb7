//! Start the service on a free port and drive one session over WebSocket.

use futures_util::{SinkExt, StreamExt};
use gridblock::server::{serve_on, AppState, DEFAULT_IDLE_TIMEOUT};
use gridblock::service::ClientMessage;
use gridblock::tasks::builtin_tasks;
use tokio_tungstenite::tungstenite::Message;

#[tokio::main]
async fn main() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
        .await
        .expect("bind");
    let addr = listener.local_addr().expect("addr");
    tokio::spawn(serve_on(
        listener,
        AppState::new(builtin_tasks()),
        DEFAULT_IDLE_TIMEOUT,
    ));

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/session"))
        .await
        .expect("connect");
    let xml = include_str!("../tests/fixtures/secret_realm_turns.xml").to_string();
    let frames = [
        ClientMessage::SelectTask {
            task_id: "secret-realm".into(),
        },
        ClientMessage::Run { xml },
    ];
    // SESSION greeting, then TASK, then VERDICT and WIRE.
    let expected_replies = [1, 1, 2];
    let mut frames = frames.iter();
    for n in expected_replies {
        for _ in 0..n {
            let msg = ws.next().await.expect("open").expect("frame");
            if let Message::Text(t) = msg {
                let v: serde_json::Value = serde_json::from_str(&t).expect("json");
                println!("<- {} {}", v["type"], truncate(&v["payload"].to_string()));
            }
        }
        if let Some(f) = frames.next() {
            println!("-> {}", truncate(&f.to_text()));
            ws.send(Message::text(f.to_text())).await.expect("send");
        }
    }
}

fn truncate(s: &str) -> String {
    match s.char_indices().nth(100) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

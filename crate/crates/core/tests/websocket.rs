mod common;

use common::ws::{start_server, WsClient};
use common::*;
use gridblock::block_ast::parse_program;
use gridblock::executor::{execute, lower};
use gridblock::service::{ClientMessage, ServerMessage, WireCommand, WireInterpreter};
use gridblock::tasks;
use serde_json::Value;

fn select(id: &str) -> ClientMessage {
    ClientMessage::SelectTask { task_id: id.into() }
}

#[tokio::test]
async fn run_and_check_agree() {
    let addr = start_server().await;
    let mut c = WsClient::connect(addr, None).await;
    assert!(matches!(
        c.request(&select("tile-cleaning")).await,
        ServerMessage::Task { .. }
    ));

    let xml = fixture("tile_reference.xml");
    let checked = c.request(&ClientMessage::Check { xml: xml.clone() }).await;
    c.send(&ClientMessage::Run { xml }).await;
    let ran = c.recv().await;
    let wire = c.recv().await;
    assert_eq!(checked, ran);
    let ServerMessage::Verdict { verdict, trace, .. } = ran else {
        panic!()
    };
    let keys: Vec<&String> = verdict.as_object().unwrap().keys().collect();
    assert_eq!(keys.len(), 4);
    for k in ["text", "xml", "is_correct", "return_button"] {
        assert!(verdict.get(k).is_some(), "missing {k}");
    }
    assert_eq!(verdict["is_correct"], true);
    let ServerMessage::Wire { commands } = wire else {
        panic!("{wire:?}")
    };
    assert_eq!(commands.len(), 10);
    assert_eq!(commands.last(), Some(&WireCommand::End));

    let mut robot = WireInterpreter::new(tasks::tile_cleaning().start);
    robot.feed_all(&commands).unwrap();
    let visited: Value = serde_json::to_value(robot.visited()).unwrap();
    assert_eq!(visited, trace["visited"]);

    let ServerMessage::Trace { trace: again } = c.request(&ClientMessage::Trace).await else {
        panic!()
    };
    assert_eq!(again, trace);
}

#[tokio::test]
async fn history_cap_over_the_wire() {
    let addr = start_server().await;
    let mut c = WsClient::connect(addr, None).await;
    c.request(&select("secret-realm")).await;
    for i in 1..=21 {
        let reply = c
            .request(&ClientMessage::Chat {
                role: "student".into(),
                text: format!("message {i}"),
            })
            .await;
        assert_eq!(
            reply,
            ServerMessage::Ack {
                history_length: i.min(20)
            }
        );
    }
    let ServerMessage::History { entries } = c.request(&ClientMessage::History).await else {
        panic!()
    };
    assert_eq!(entries.len(), 20);
    assert_eq!(entries[0].text, "message 2");
    assert_eq!(entries[19].text, "message 21");

    let ServerMessage::Prompt {
        task_instructions,
        context_block,
        ..
    } = c.request(&ClientMessage::Prompt).await
    else {
        panic!()
    };
    assert!(task_instructions.contains("(4,3)"));
    assert_eq!(context_block.matches("[student] message ").count(), 20);
}

#[tokio::test]
async fn sessions_are_isolated_and_resumable() {
    let addr = start_server().await;
    let mut a = WsClient::connect(addr, None).await;
    let mut b = WsClient::connect(addr, None).await;
    assert_ne!(a.session_id, b.session_id);
    a.request(&select("mineral")).await;
    let err = b
        .request(&ClientMessage::Check {
            xml: fixture("mineral_route.xml"),
        })
        .await;
    assert!(
        matches!(err, ServerMessage::Error { ref code, .. } if code == "NO_TASK"),
        "{err:?}"
    );

    let ServerMessage::Verdict { verdict, .. } = a
        .request(&ClientMessage::Check {
            xml: fixture("mineral_route.xml"),
        })
        .await
    else {
        panic!()
    };
    assert_eq!(verdict["is_correct"], true);
    let id = a.session_id.clone();
    drop(a);

    let mut again = WsClient::connect(addr, Some(&id)).await;
    assert_eq!(again.session_id, id);
    let ServerMessage::History { entries } = again.request(&ClientMessage::History).await else {
        panic!()
    };
    assert_eq!(entries.len(), 2);
}

#[tokio::test]
async fn bad_frames_get_error_replies() {
    let addr = start_server().await;
    let mut c = WsClient::connect(addr, None).await;
    c.send_raw("not json").await;
    assert!(matches!(c.recv().await, ServerMessage::Error { code, .. } if code == "BAD_FRAME"));
    c.send_raw(r#"{"type":"DANCE","payload":{}}"#).await;
    assert!(matches!(c.recv().await, ServerMessage::Error { code, .. } if code == "UNKNOWN_TYPE"));
    c.request(&select("tile")).await;
    let e = c
        .request(&ClientMessage::Run {
            xml: fixture("malformed.xml"),
        })
        .await;
    assert!(matches!(e, ServerMessage::Error { code, .. } if code == "PARSE_ERROR"));
    // The connection is still usable.
    let ok = c
        .request(&ClientMessage::Check {
            xml: fixture("tile_reference.xml"),
        })
        .await;
    assert!(matches!(ok, ServerMessage::Verdict { .. }));
}

#[tokio::test]
async fn many_sessions_in_parallel() {
    let addr = start_server().await;
    let jobs = (0..8).map(|i| {
        tokio::spawn(async move {
            let (task, file) = if i % 2 == 0 {
                ("secret-realm", "secret_realm_turns.xml")
            } else {
                ("knights-tour", "knight_reference.xml")
            };
            let mut c = WsClient::connect(addr, None).await;
            c.request(&select(task)).await;
            let xml = fixture(file);
            let ServerMessage::Verdict { trace, .. } =
                c.request(&ClientMessage::Check { xml: xml.clone() }).await
            else {
                panic!()
            };
            let t = tasks::find_task(&tasks::builtin_tasks(), task)
                .unwrap()
                .clone();
            let local = execute(&lower(&parse_program(&xml).unwrap()).unwrap(), &t);
            assert_eq!(trace, local.to_canonical_json());
        })
    });
    for j in jobs {
        j.await.unwrap();
    }
}

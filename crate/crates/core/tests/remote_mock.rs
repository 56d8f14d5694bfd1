//! The remote backend against a throwaway HTTP server on localhost.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use gazeground_core::agent::{
    build_tool_registry, AgentConfig, AgentSession, Backend, BackendError, RemoteBackend, RemoteConfig, TurnStatus,
};
use gazeground_core::eval::{builtin_scenario, EvalCondition};
use serde_json::{json, Value};

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    authorization: Option<String>,
    body: Value,
}

/// Serves the canned `(status, body)` responses in order, one per
/// connection, and records what it received.
fn mock_server(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in responses {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut length = 0usize;
            let mut authorization = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (k, v) = line.split_once(':').unwrap();
                match k.to_ascii_lowercase().as_str() {
                    "content-length" => length = v.trim().parse().unwrap(),
                    "authorization" => authorization = Some(v.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0u8; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Seen {
                path: request_line.split_whitespace().nth(1).unwrap_or("").to_string(),
                authorization,
                body: serde_json::from_slice(&buf).unwrap_or(Value::Null),
            });
            let mut stream = stream;
            let reply = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });
    (url, seen)
}

fn config(url: &str) -> RemoteConfig {
    RemoteConfig {
        base_url: url.to_string(),
        api_key: "test-key".into(),
        model: Some("gpt-test".into()),
        timeout: Duration::from_secs(10),
    }
}

fn completion(message: Value) -> String {
    json!({"choices": [{"index": 0, "message": message, "finish_reason": "stop"}]}).to_string()
}

#[test]
fn server_error_is_retried_and_turn_completes() {
    let tool_reply = completion(json!({
        "role": "assistant",
        "content": null,
        "tool_calls": [{
            "id": "call_a",
            "type": "function",
            "function": {"name": "required_objects", "arguments": "{\"objects\": [\"bowl\"]}"}
        }]
    }));
    let final_reply = completion(json!({"role": "assistant", "content": "Done."}));
    let (url, seen) = mock_server(vec![
        (503, "{\"error\": \"overloaded\"}".into()),
        (200, tool_reply),
        (200, final_reply),
    ]);
    let backend: Arc<dyn Backend> = Arc::new(RemoteBackend::new(config(&url)).unwrap());
    let scenario = builtin_scenario("drink").unwrap();
    let mut session = AgentSession::new(
        scenario.scene.clone(),
        build_tool_registry(EvalCondition::FULL, false),
        backend,
        AgentConfig::default(),
    );
    let turn = session.run_turn_text("Speech input: \"hi\"\nGaze history:\n(none)", &mut |_| {});
    assert_eq!(turn.status, TurnStatus::Completed, "{:?}", turn.error);
    assert_eq!(turn.backend_retries, 1);
    assert_eq!(turn.required_objects, Some(vec!["bowl".to_string()]));
    assert_eq!(turn.final_message.as_deref(), Some("Done."));

    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    assert!(seen.iter().all(|s| s.path == "/v1/chat/completions"));
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer test-key"));
    assert_eq!(seen[1].body["model"], "gpt-test");
    let tools: Vec<&str> = seen[1].body["tools"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["function"]["name"].as_str().unwrap())
        .collect();
    assert!(tools.contains(&"query_objects"));
    // The tool result travels back on the third request.
    let msgs = seen[2].body["messages"].as_array().unwrap();
    assert_eq!(msgs.last().unwrap()["role"], "tool");
    assert_eq!(msgs.last().unwrap()["tool_call_id"], "call_a");
}

#[test]
fn client_error_is_not_retried() {
    let (url, seen) = mock_server(vec![(400, "{\"error\": \"bad request\"}".into())]);
    let backend = RemoteBackend::new(config(&url)).unwrap();
    let scenario = builtin_scenario("drink").unwrap();
    let mut session = AgentSession::new(
        scenario.scene.clone(),
        build_tool_registry(EvalCondition::FULL, false),
        Arc::new(backend),
        AgentConfig::default(),
    );
    let turn = session.run_turn_text("x", &mut |_| {});
    assert_eq!(turn.status, TurnStatus::Error);
    assert_eq!(turn.backend_retries, 0);
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn unreachable_server_is_a_transport_error() {
    // Bind then drop to get a port nobody listens on.
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let backend = RemoteBackend::new(config(&format!("http://127.0.0.1:{port}/v1"))).unwrap();
    let req = gazeground_core::agent::CompletionRequest {
        model: "m".into(),
        temperature: 0.0,
        messages: vec![],
        tools: vec![],
    };
    assert!(matches!(backend.complete(&req), Err(BackendError::Transport(_))));
}

#[test]
fn empty_key_is_a_config_error() {
    let mut c = config("http://localhost");
    c.api_key = "  ".into();
    assert!(matches!(RemoteBackend::new(c), Err(BackendError::Config(_))));
}

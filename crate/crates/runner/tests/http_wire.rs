//! The real reqwest transport against a local HTTP/1.1 stub: request shape
//! on the wire, auth header handling, retry on 429, and the 401 fast-fail.

use std::sync::Arc;

use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpListener;

use proctor_core::config::{
    GenerationParams, ModelKind, ModelSpec, ProviderRef, TransportPolicy,
};
use proctor_core::persona::Persona;
use proctor_core::plan::RunTask;
use proctor_core::prompt::{PromptPair, PromptVariant};
use proctor_runner::connector::build_connector;
use proctor_runner::remote::{HttpProbabilityProvider, ProbabilityProvider};

struct StubServer {
    addr: std::net::SocketAddr,
    requests: Arc<tokio::sync::Mutex<Vec<String>>>,
}

fn find_blank_line(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n").map(|p| p + 4)
}

/// Serves the canned responses one connection each, recording every raw
/// request. Responses close the connection, so each request dials anew.
async fn spawn_stub(responses: Vec<(u16, &'static str, String)>) -> StubServer {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let requests = Arc::new(tokio::sync::Mutex::new(Vec::new()));
    let log = requests.clone();
    tokio::spawn(async move {
        for (status, reason, body) in responses {
            let Ok((mut socket, _)) = listener.accept().await else { return };
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            loop {
                let Ok(n) = socket.read(&mut chunk).await else { return };
                if n == 0 {
                    break;
                }
                buf.extend_from_slice(&chunk[..n]);
                if let Some(header_end) = find_blank_line(&buf) {
                    let headers = String::from_utf8_lossy(&buf[..header_end]).to_lowercase();
                    let content_length: usize = headers
                        .lines()
                        .find_map(|l| l.strip_prefix("content-length:"))
                        .and_then(|v| v.trim().parse().ok())
                        .unwrap_or(0);
                    if buf.len() >= header_end + content_length {
                        break;
                    }
                }
            }
            log.lock().await.push(String::from_utf8_lossy(&buf).into_owned());
            let response = format!(
                "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len(),
            );
            socket.write_all(response.as_bytes()).await.ok();
            socket.shutdown().await.ok();
        }
    });
    StubServer { addr, requests }
}

fn task() -> RunTask {
    RunTask {
        model_id: "wire".into(),
        persona: Persona::new("Ms.", "Kim", "asian").unwrap(),
        question_id: "q1".into(),
        seed: 42,
        repetition_index: 0,
        prompt_variant: PromptVariant::Json,
    }
}

fn prompt() -> PromptPair {
    PromptPair { system: "system text".into(), user: "user text".into() }
}

fn spec(addr: std::net::SocketAddr, auth_env: Option<&str>, supports_top_k: bool) -> ModelSpec {
    ModelSpec {
        id: "wire".into(),
        kind: ModelKind::RemoteChat,
        endpoint: Some(format!("http://{addr}/v1")),
        model_name: "test-model".into(),
        auth_env: auth_env.map(str::to_owned),
        params: GenerationParams::default(),
        script: None,
        transport: TransportPolicy { base_backoff_ms: 5, timeout_ms: 5_000, ..Default::default() },
        supports_top_k,
    }
}

fn body_json(raw_request: &str) -> serde_json::Value {
    let body = raw_request.split("\r\n\r\n").nth(1).unwrap();
    serde_json::from_str(body).unwrap()
}

#[tokio::test]
async fn rate_limited_request_is_retried_and_the_wire_format_is_right() {
    let ok_body = serde_json::json!({
        "model": "test-model",
        "choices": [{"message": {"role": "assistant", "content": "from the wire"}}],
        "usage": {"total_tokens": 7},
    })
    .to_string();
    let stub = spawn_stub(vec![
        (429, "Too Many Requests", "{}".to_owned()),
        (200, "OK", ok_body),
    ])
    .await;

    std::env::set_var("WIRE_TEST_KEY", "wire-test-secret");
    let connector = build_connector(&spec(stub.addr, Some("WIRE_TEST_KEY"), false)).unwrap();
    let raw = connector.generate(&task(), &prompt()).await;
    assert_eq!(raw.error, None, "{:?}", raw.error);
    assert_eq!(raw.text, "from the wire");
    assert_eq!(raw.retry_count, 1);
    let meta = raw.endpoint_meta.unwrap();
    assert_eq!(meta["model"], "test-model");
    assert_eq!(meta["usage"]["total_tokens"], 7);

    let requests = stub.requests.lock().await;
    assert_eq!(requests.len(), 2);
    for request in requests.iter() {
        assert!(request.starts_with("POST /v1/chat/completions HTTP/1.1\r\n"));
        assert!(request.to_lowercase().contains("authorization: bearer wire-test-secret"));
    }
    let body = body_json(&requests[1]);
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][0]["content"], "system text");
    assert_eq!(body["messages"][1]["role"], "user");
    assert_eq!(body["messages"][1]["content"], "user text");
    assert_eq!(body["max_tokens"], 64);
    assert_eq!(body["temperature"], 1.0);
    assert_eq!(body["top_p"], 0.95);
    assert_eq!(body["seed"], 42);
    assert!(body.get("top_k").is_none(), "top_k must be dropped by default");
}

#[tokio::test]
async fn top_k_is_forwarded_only_on_opt_in() {
    let ok_body = serde_json::json!({
        "choices": [{"message": {"content": "ok"}}],
    })
    .to_string();
    let stub = spawn_stub(vec![(200, "OK", ok_body)]).await;
    let connector = build_connector(&spec(stub.addr, None, true)).unwrap();
    let raw = connector.generate(&task(), &prompt()).await;
    assert_eq!(raw.error, None);
    let requests = stub.requests.lock().await;
    let body = body_json(&requests[0]);
    assert_eq!(body["top_k"], 50);
    // No auth variable configured, no Authorization header on the wire.
    assert!(!requests[0].to_lowercase().contains("authorization:"));
}

#[tokio::test]
async fn unauthorized_fails_without_retrying() {
    let stub = spawn_stub(vec![
        (401, "Unauthorized", "{\"error\": \"bad key\"}".to_owned()),
        (200, "OK", "{}".to_owned()),
    ])
    .await;
    let connector = build_connector(&spec(stub.addr, None, false)).unwrap();
    let raw = connector.generate(&task(), &prompt()).await;
    assert_eq!(raw.retry_count, 0);
    let error = raw.error.unwrap();
    assert!(error.contains("401"), "{error}");
    assert!(error.contains("bad key"), "{error}");
    // Only the first canned response was consumed.
    assert_eq!(stub.requests.lock().await.len(), 1);
}

#[tokio::test]
async fn malformed_reply_is_a_fatal_error() {
    let stub = spawn_stub(vec![(200, "OK", "{\"choices\": []}".to_owned())]).await;
    let connector = build_connector(&spec(stub.addr, None, false)).unwrap();
    let raw = connector.generate(&task(), &prompt()).await;
    assert_eq!(raw.retry_count, 0);
    assert!(raw.error.unwrap().contains("choices[0].message.content"));
}

#[tokio::test]
async fn probability_provider_round_trips() {
    let stub = spawn_stub(vec![(
        200,
        "OK",
        "{\"probabilities\": [0.05, 0.05, 0.9]}".to_owned(),
    )])
    .await;
    let provider = HttpProbabilityProvider::new(&ProviderRef {
        endpoint: format!("http://{}/judge", stub.addr),
        auth_env: None,
        transport: TransportPolicy { base_backoff_ms: 5, timeout_ms: 5_000, ..Default::default() },
    })
    .unwrap();
    let displays = vec!["1. no".to_owned(), "2.".to_owned(), "3. yes".to_owned()];
    let probs = provider.probabilities("I say yes", &displays).await.unwrap();
    assert_eq!(probs, vec![0.05, 0.05, 0.9]);

    let requests = stub.requests.lock().await;
    assert!(requests[0].starts_with("POST /judge HTTP/1.1\r\n"));
    let body = body_json(&requests[0]);
    assert_eq!(body["response_text"], "I say yes");
    assert_eq!(body["option_display_texts"][2], "3. yes");
}

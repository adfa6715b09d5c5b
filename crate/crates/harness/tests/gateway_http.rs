mod common;

use std::path::Path;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use common::MockServer;
use serde_json::{json, Value};
use usersim::config::Config;
use usersim::gateway::{CompletionRequest, Gateway};

fn ok(text: &str) -> (u16, String) {
    (
        200,
        json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string(),
    )
}

fn gateway(url: &str, key_var: &str, retries: u32) -> Gateway {
    let cfg = Config::from_toml(
        &format!(
            "[backend]\nkind = \"http\"\nmodel = \"test-model\"\nendpoint = \"{url}/v1/chat/completions\"\napi_key_env = \"{key_var}\"\ntemperature = 0.7\nmax_retries = {retries}\nbackoff_ms = 0\n"
        ),
        Path::new("."),
    )
    .unwrap();
    Gateway::from_config(&cfg.backend).unwrap().with_sleeper(|_| {})
}

#[test]
fn request_shape_and_credentials() {
    std::env::set_var("USERSIM_TEST_KEY_A", "sk-test-a");
    let server = MockServer::start(|_| ok("Yes"));
    let gw = gateway(&server.url, "USERSIM_TEST_KEY_A", 0);
    gw.preflight().unwrap();
    let reply = gw
        .complete(&CompletionRequest::new("c1", "Would you watch Heat (1995)?", 3))
        .unwrap();
    assert_eq!(reply.raw_text, "Yes");
    assert_eq!(reply.model, "test-model");
    assert!(reply.latency_ms.is_some());
    let seen = server.requests();
    assert_eq!(seen[0].method, "POST");
    assert_eq!(seen[0].path, "/v1/chat/completions");
    assert_eq!(seen[0].headers["authorization"], "Bearer sk-test-a");
    let body: Value = serde_json::from_str(&seen[0].body).unwrap();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["messages"][0]["content"], "Would you watch Heat (1995)?");
    assert_eq!(body["temperature"], 0.7);

    let missing = gateway(&server.url, "USERSIM_TEST_KEY_UNSET", 0);
    assert!(missing
        .preflight()
        .unwrap_err()
        .to_string()
        .contains("USERSIM_TEST_KEY_UNSET"));
}

#[test]
fn transient_statuses_are_retried() {
    std::env::set_var("USERSIM_TEST_KEY_B", "k");
    let calls = Arc::new(AtomicU32::new(0));
    let c = calls.clone();
    let server = MockServer::start(move |_| match c.fetch_add(1, Ordering::SeqCst) {
        0 => (429, "{\"error\":\"rate limited\"}".into()),
        1 => (503, "{}".into()),
        _ => ok("Accept"),
    });
    let gw = gateway(&server.url, "USERSIM_TEST_KEY_B", 3);
    let reply = gw.complete(&CompletionRequest::new("c", "p", 0)).unwrap();
    assert_eq!(reply.raw_text, "Accept");
    assert_eq!(reply.retries, 2);

    // Retries run out.
    let server = MockServer::start(|_| (500, "{}".into()));
    let gw = gateway(&server.url, "USERSIM_TEST_KEY_B", 2);
    let failure = gw.complete(&CompletionRequest::new("c", "p", 0)).unwrap_err().unwrap();
    assert_eq!(failure.retries, 2);
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn permanent_and_fatal_statuses() {
    std::env::set_var("USERSIM_TEST_KEY_C", "k");
    let server = MockServer::start(|_| (400, "{\"error\":\"bad request\"}".into()));
    let gw = gateway(&server.url, "USERSIM_TEST_KEY_C", 3);
    let reqs = [
        CompletionRequest::new("a", "p1", 0),
        CompletionRequest::new("b", "p2", 0),
    ];
    let results = gw.complete_all(&reqs).unwrap();
    assert!(results
        .iter()
        .all(|r| r.as_ref().is_err_and(|f| f.retries == 0 && f.error.contains("400"))));
    assert_eq!(server.requests().len(), 2);

    // A reply without content is a failed case.
    let server = MockServer::start(|_| (200, json!({"choices": [{"message": {"content": null}}]}).to_string()));
    let gw = gateway(&server.url, "USERSIM_TEST_KEY_C", 0);
    assert!(gw.complete(&CompletionRequest::new("a", "p", 0)).unwrap_err().is_ok());

    let server = MockServer::start(|_| (401, "{\"error\":\"invalid key\"}".into()));
    let gw = gateway(&server.url, "USERSIM_TEST_KEY_C", 3).with_max_in_flight(1);
    let reqs: Vec<_> = (0..5)
        .map(|i| CompletionRequest::new(format!("c{i}"), "p", 0))
        .collect();
    let fatal = gw.complete_all(&reqs).unwrap_err();
    assert_eq!(fatal.case_id, "c0");
    assert_eq!(server.requests().len(), 1);
}

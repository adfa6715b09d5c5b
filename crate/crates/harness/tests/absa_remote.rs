mod common;

use std::collections::HashMap;
use std::time::Duration;

use common::{test_fixtures, MockServer};
use serde_json::{json, Value};
use usersim::absa::{extract_corpus, Extractor, FixtureExtractor, LexiconExtractor, RemoteExtractor, MAX_BATCH};
use usersim_core::aspect::Sentiment;
use usersim_core::metrics::aspect_stats;

fn sentences() -> Vec<Value> {
    std::fs::read_to_string(test_fixtures().join("absa/sentences.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// A service answering from the gold fixture, refusing batches over `cap`.
fn service(cap: usize) -> MockServer {
    let gold: HashMap<String, Value> = sentences()
        .into_iter()
        .map(|v| (v["text"].as_str().unwrap().to_string(), v["pairs"].clone()))
        .collect();
    MockServer::start(move |req| {
        if req.method == "GET" && req.path == "/health" {
            return (
                200,
                json!({"model_version": "fixture-1", "label_set": ["positive", "negative", "neutral"]}).to_string(),
            );
        }
        let Ok(body) = serde_json::from_str::<Value>(&req.body) else {
            return (400, json!({"error": "malformed body"}).to_string());
        };
        let Some(texts) = body["texts"].as_array() else {
            return (400, json!({"error": "missing texts"}).to_string());
        };
        if texts.len() > cap {
            return (413, json!({"error": "batch too large"}).to_string());
        }
        let results: Vec<Value> = texts
            .iter()
            .map(|t| gold.get(t.as_str().unwrap_or("")).cloned().unwrap_or(json!([])))
            .collect();
        (200, json!({ "results": results }).to_string())
    })
}

fn entries() -> Vec<(String, String)> {
    sentences()
        .iter()
        .enumerate()
        .map(|(i, v)| (format!("s{i}"), v["text"].as_str().unwrap().to_string()))
        .collect()
}

fn fixture_extractor() -> FixtureExtractor {
    FixtureExtractor::load(&test_fixtures().join("absa/sentences.jsonl")).unwrap()
}

#[test]
fn remote_and_fixture_aggregates_agree_exactly() {
    let server = service(MAX_BATCH);
    let remote = RemoteExtractor::new(format!("{}/extract", server.url), Duration::from_secs(5));
    remote.preflight().unwrap();
    assert_eq!(remote.health().unwrap().model_version, "fixture-1");
    let via_remote = extract_corpus(&remote, &entries(), false).unwrap();
    let via_fixture = extract_corpus(&fixture_extractor(), &entries(), false).unwrap();
    assert_eq!(via_remote, via_fixture);
    assert_eq!(
        aspect_stats(&via_remote.pairs).unwrap(),
        aspect_stats(&via_fixture.pairs).unwrap()
    );
    assert_eq!(via_remote.excluded, 0);
    for r in server.requests().iter().filter(|r| r.method == "POST") {
        assert_eq!(
            r.headers.get("content-type").map(String::as_str),
            Some("application/json")
        );
    }
}

#[test]
fn batches_respect_the_limit_and_413_splits() {
    let server = service(MAX_BATCH);
    let remote = RemoteExtractor::new(format!("{}/extract", server.url), Duration::from_secs(5));
    let texts: Vec<String> = (0..600).map(|i| format!("text {i}")).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    assert_eq!(remote.extract(&refs).unwrap().len(), 600);
    let sizes: Vec<usize> = server
        .requests()
        .iter()
        .map(|r| {
            serde_json::from_str::<Value>(&r.body).unwrap()["texts"]
                .as_array()
                .unwrap()
                .len()
        })
        .collect();
    assert_eq!(sizes, [256, 256, 88]);

    // A service with a smaller limit answers 413; the client halves until it fits.
    let small = service(20);
    let remote = RemoteExtractor::new(format!("{}/extract", small.url), Duration::from_secs(5));
    let e = entries();
    let texts: Vec<&str> = e.iter().map(|x| x.1.as_str()).collect();
    let got = remote.extract(&texts).unwrap();
    let want = fixture_extractor().extract(&texts).unwrap();
    assert_eq!(got, want);
    assert!(small.requests().iter().any(|r| r.body.len() > 2 && {
        let n = serde_json::from_str::<Value>(&r.body).unwrap()["texts"]
            .as_array()
            .unwrap()
            .len();
        n <= 20
    }));
}

#[test]
fn service_errors_are_hard_errors() {
    for (status, needle) in [(400u16, "400"), (500, "500")] {
        let server = MockServer::start(move |_| (status, json!({"error": "x", "id": "e-1"}).to_string()));
        let remote = RemoteExtractor::new(format!("{}/extract", server.url), Duration::from_secs(5));
        let err = remote.extract(&["The plot was weak."]).unwrap_err();
        assert!(format!("{err:#}").contains(needle), "{err:#}");
    }
    // Results that break the wire schema.
    let server = MockServer::start(|_| {
        (
            200,
            json!({"results": [[{"aspect": "plot", "sentiment": "meh"}]]}).to_string(),
        )
    });
    let remote = RemoteExtractor::new(format!("{}/extract", server.url), Duration::from_secs(5));
    assert!(remote.extract(&["x"]).is_err());
    let server = MockServer::start(|_| (200, json!({"results": []}).to_string()));
    let remote = RemoteExtractor::new(format!("{}/extract", server.url), Duration::from_secs(5));
    assert!(remote.extract(&["x"]).is_err());

    let dead = RemoteExtractor::new("http://127.0.0.1:9/extract", Duration::from_secs(2));
    assert!(format!("{:#}", dead.preflight().unwrap_err()).contains("unreachable"));
}

#[test]
fn lexicon_reads_the_reference_sentence() {
    let got = LexiconExtractor
        .extract(&["The cast was brilliant but the plot dragged"])
        .unwrap();
    assert_eq!(
        got[0].as_deref().unwrap(),
        [
            ("cast".to_string(), Sentiment::Positive),
            ("plot".to_string(), Sentiment::Negative)
        ]
    );
}

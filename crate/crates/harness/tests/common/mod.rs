//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::Deserialize;
use usersim::corpus::{ingest, DataDir};
use usersim::runner::{self, RunOptions, RunSummary};
use usersim_core::catalog::{Item, ItemCatalog};
use usersim_core::parse::{
    parse_accept_reject, parse_agent_choice, parse_binary, parse_item_list, AgentChoice, BinaryAnswer, CatalogIndex,
    Feedback, DEFAULT_FUZZY_THRESHOLD,
};
use usersim_core::{Dataset, Task};

pub const GOLDEN_SEED: u64 = 7;

pub fn mini() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini")
}

pub fn test_fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn replay_config() -> PathBuf {
    mini().join("replay.toml")
}

/// Ingests the bundled raw datasets with the CLI's default seed.
pub fn ingest_mini(root: &Path) -> DataDir {
    let data = DataDir::new(root);
    for d in [Dataset::Redial, Dataset::Reddit, Dataset::Imdb] {
        ingest(d, &mini().join(format!("raw/{}.jsonl", d.name())), &data, 0).unwrap();
    }
    ingest(Dataset::Movielens, &mini().join("raw/movielens"), &data, 0).unwrap();
    data
}

/// The golden run: every task and baseline, explanations on, seed 7.
pub fn golden_options(data: &Path, out: &Path) -> RunOptions {
    RunOptions {
        tasks: Task::ALL.to_vec(),
        baseline: None,
        config: replay_config(),
        seed: GOLDEN_SEED,
        explanations: true,
        reasons: false,
        data: data.to_path_buf(),
        out: out.to_path_buf(),
    }
}

pub fn full_run(data: &Path, out: &Path) -> RunSummary {
    runner::run(&golden_options(data, out)).unwrap()
}

/// Every file under `dir`, keyed by relative path.
pub fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p.strip_prefix(base).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Files under golden control: tables and chart series.
pub fn golden_subset(tree: &BTreeMap<String, Vec<u8>>) -> BTreeMap<String, Vec<u8>> {
    tree.iter()
        .filter(|(k, _)| k.starts_with("tables/") || (k.starts_with("charts/") && k.ends_with(".csv")))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

/// Compares a run directory with the committed golden files. With
/// `UPDATE_GOLDEN=1` the golden files are rewritten instead.
pub fn check_golden(run_dir: &Path) -> Result<usize, String> {
    let actual = golden_subset(&read_tree(run_dir));
    let dir = golden_dir();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        if dir.exists() {
            std::fs::remove_dir_all(&dir).unwrap();
        }
        for (k, v) in &actual {
            let p = dir.join(k);
            std::fs::create_dir_all(p.parent().unwrap()).unwrap();
            std::fs::write(p, v).unwrap();
        }
        return Ok(actual.len());
    }
    if !dir.is_dir() {
        return Err(format!(
            "no golden files at {}; run with UPDATE_GOLDEN=1",
            dir.display()
        ));
    }
    let expected = read_tree(&dir);
    let mut problems = Vec::new();
    for k in expected.keys().chain(actual.keys()).collect::<BTreeSet<_>>() {
        match (expected.get(k), actual.get(k)) {
            (Some(a), Some(b)) if a == b => {}
            (Some(_), Some(_)) => problems.push(format!("differs: {k}")),
            (Some(_), None) => problems.push(format!("not produced: {k}")),
            (None, Some(_)) => problems.push(format!("not in golden set: {k}")),
            (None, None) => unreachable!(),
        }
    }
    if problems.is_empty() {
        Ok(actual.len())
    } else {
        Err(problems.join("\n"))
    }
}

// ------------------------------------------------------------ parser fixtures

#[derive(Deserialize)]
struct ItemListCase {
    reply: String,
    gold: Vec<String>,
    note: String,
    #[serde(default = "yes")]
    valid: bool,
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
struct LabelCase {
    reply: String,
    gold: String,
}

fn read_lines<T: for<'de> Deserialize<'de>>(name: &str) -> Vec<T> {
    let text = std::fs::read_to_string(test_fixtures().join("parsers").join(name)).unwrap();
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Passed, total, and a description of each miss.
pub struct Score {
    pub passed: usize,
    pub total: usize,
    pub misses: Vec<String>,
}

pub fn score_item_lists() -> Score {
    let text = std::fs::read_to_string(test_fixtures().join("parsers/catalog.txt")).unwrap();
    let mut catalog = ItemCatalog::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        catalog.insert(Item::parse(line).unwrap());
    }
    let index = CatalogIndex::from_catalog(&catalog);
    let cases: Vec<ItemListCase> = read_lines("item_lists.jsonl");
    let mut s = Score {
        passed: 0,
        total: cases.len(),
        misses: Vec::new(),
    };
    for c in cases {
        let gold: BTreeSet<_> = c.gold.iter().map(|g| Item::parse(g).unwrap().key).collect();
        let (outcome, _) = parse_item_list(&c.reply, Some(c.gold.len()), &index, DEFAULT_FUZZY_THRESHOLD);
        let got: BTreeSet<_> = outcome
            .items()
            .unwrap_or(&[])
            .iter()
            .filter_map(|m| m.key().cloned())
            .collect();
        if outcome.is_valid() == c.valid && got == gold {
            s.passed += 1;
        } else {
            s.misses.push(format!("[{}] {:?}: got {:?}", c.note, c.reply, got));
        }
    }
    s
}

fn score_labels(name: &str, label: impl Fn(&str) -> String) -> Score {
    let cases: Vec<LabelCase> = read_lines(name);
    let mut s = Score {
        passed: 0,
        total: cases.len(),
        misses: Vec::new(),
    };
    for c in cases {
        let got = label(&c.reply);
        if got == c.gold {
            s.passed += 1;
        } else {
            s.misses.push(format!("{:?}: want {}, got {got}", c.reply, c.gold));
        }
    }
    s
}

pub fn score_binary() -> Score {
    score_labels("binary.jsonl", |r| {
        match parse_binary(r).binary() {
            Some(BinaryAnswer::Yes) => "yes",
            Some(BinaryAnswer::No) => "no",
            None => "invalid",
        }
        .to_string()
    })
}

pub fn score_accept_reject() -> Score {
    score_labels("accept_reject.jsonl", |r| {
        match parse_accept_reject(r).feedback() {
            Some(Feedback::Accept) => "accept",
            Some(Feedback::Reject) => "reject",
            None => "invalid",
        }
        .to_string()
    })
}

pub fn score_agent_choice() -> Score {
    score_labels("agent_choice.jsonl", |r| {
        match parse_agent_choice(r).choice() {
            Some(AgentChoice::Agent1) => "agent1",
            Some(AgentChoice::Agent2) => "agent2",
            Some(AgentChoice::Neither) => "neither",
            None => "invalid",
        }
        .to_string()
    })
}

// ------------------------------------------------------------ mock HTTP server

/// A request as seen by [`MockServer`].
#[derive(Debug, Clone)]
pub struct Seen {
    pub method: String,
    pub path: String,
    pub headers: BTreeMap<String, String>,
    pub body: String,
}

type Handler = dyn Fn(&Seen) -> (u16, String) + Send + Sync;

/// A one-thread HTTP/1.1 server answering with a closure.
pub struct MockServer {
    pub url: String,
    pub seen: Arc<Mutex<Vec<Seen>>>,
}

impl MockServer {
    pub fn start(handler: impl Fn(&Seen) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = seen.clone();
        let handler: Arc<Handler> = Arc::new(handler);
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let Some(req) = read_request(&mut stream) else { continue };
                let (status, body) = handler(&req);
                log.lock().unwrap().push(req);
                let resp = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(resp.as_bytes());
                let _ = stream.flush();
            }
        });
        MockServer { url, seen }
    }

    pub fn requests(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }
}

fn read_request(stream: &mut std::net::TcpStream) -> Option<Seen> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let mut parts = line.split_whitespace();
    let method = parts.next()?.to_string();
    let path = parts.next()?.to_string();
    let mut headers = BTreeMap::new();
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).ok()?;
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            headers.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
    }
    let len: usize = headers.get("content-length").and_then(|v| v.parse().ok()).unwrap_or(0);
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body).ok()?;
    Some(Seen {
        method,
        path,
        headers,
        body: String::from_utf8_lossy(&body).into_owned(),
    })
}

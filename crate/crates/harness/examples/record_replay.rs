//! Records `fixtures/mini/replay.jsonl` from a scripted responder.
//!
//! The responder answers every prompt of a full run (seed 7, explanations
//! on) with a reply chosen by hashing the prompt id, so the recording is
//! reproducible. Run from the workspace root:
//!
//! ```text
//! cargo run -p usersim --example record_replay
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Result;
use sha2::{Digest, Sha256};
use usersim::config::Config;
use usersim::corpus::{ingest, DataDir};
use usersim::gateway::ScriptedBackend;
use usersim::gateway::{CompletionRequest, Gateway, ReplyLogEntry};
use usersim::io;
use usersim::runner::{self, RunOptions, REPLIES_SCHEMA};
use usersim_core::{Dataset, Task};

pub const SEED: u64 = 7;
/// `usersim ingest` default.
pub const INGEST_SEED: u64 = 0;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini")
}

fn pick(id: &str, salt: &str) -> u64 {
    let h = Sha256::digest(format!("{salt}\0{id}").as_bytes());
    u64::from_le_bytes(h[..8].try_into().unwrap())
}

fn titles() -> Result<Vec<String>> {
    let mut rdr = csv::Reader::from_path(fixtures().join("raw/movielens/movies.csv"))?;
    let mut out = Vec::new();
    for row in rdr.records() {
        out.push(row?[1].to_string());
    }
    Ok(out)
}

const ASPECTS: [&str; 8] = [
    "acting",
    "plot",
    "music",
    "visuals",
    "ending",
    "characters",
    "pacing",
    "dialogue",
];
const GOOD: [&str; 5] = ["brilliant", "great", "superb", "beautiful", "good"];
const BAD: [&str; 4] = ["boring", "weak", "dull", "predictable"];
const ASKS: [&str; 6] = [
    "I am looking for a movie like {m} with a clever twist",
    "Recommend me a feel good film, I loved {m}",
    "Any movies similar to {m}? Something dark and moody please",
    "I want a funny movie to watch with friends tonight",
    "Suggest a sci fi film that makes you think",
    "Need a heartwarming family movie for the weekend, like {m}",
];

fn respond(req: &CompletionRequest, titles: &[String]) -> String {
    let id = req.case_id.as_str();
    let r = |salt: &str| pick(id, salt);
    let title = |salt: &str| titles[(r(salt) % titles.len() as u64) as usize].clone();
    if id.starts_with("t1/") {
        if r("invalid") % 20 == 0 {
            return "I'm not sure, I watch all kinds of things.".into();
        }
        let n = 2 + r("n") % 4;
        let mut lines = Vec::new();
        for i in 0..n {
            let mut t = title(&format!("item{i}"));
            match r(&format!("noise{i}")) % 12 {
                0 => t = t.replacen('e', "ee", 1),
                1 => t = "A Film Nobody Has Heard Of (2003)".into(),
                _ => {}
            }
            lines.push(format!("{}. {t}", i + 1));
        }
        return lines.join("\n");
    }
    if id.starts_with("t2/") {
        if r("invalid") % 25 == 0 {
            return "Maybe, it depends on my mood.".into();
        }
        // Per-movie leaning from the movie part of the id, per-persona noise.
        let movie = id.rsplit_once('/').map(|x| x.0).unwrap_or(id);
        let lean = pick(movie, "lean") % 10;
        return if r("yes") % 10 < lean { "Yes" } else { "No" }.into();
    }
    if id.starts_with("t3/") {
        let n = 1 + r("n") % 3;
        let parts: Vec<String> = (0..n)
            .map(|i| {
                let a = ASPECTS[(r(&format!("a{i}")) % ASPECTS.len() as u64) as usize];
                if r(&format!("s{i}")) % 3 == 0 {
                    format!("the {a} was {}", BAD[(r(&format!("w{i}")) % BAD.len() as u64) as usize])
                } else {
                    format!(
                        "the {a} was {}",
                        GOOD[(r(&format!("w{i}")) % GOOD.len() as u64) as usize]
                    )
                }
            })
            .collect();
        let mut s = parts.join(" but ");
        s[..1].make_ascii_uppercase();
        return format!("{s}.");
    }
    if id.starts_with("t4/") {
        let ask = ASKS[(r("ask") % ASKS.len() as u64) as usize];
        let m = title("m");
        let name = m.rsplit_once(" (").map(|x| x.0).unwrap_or(&m).to_string();
        return ask.replace("{m}", &name) + ".";
    }
    if id.contains("/accept_reject/") {
        let p_accept = if id.contains("/positive/") { 8 } else { 4 };
        return if r("accept") % 10 < p_accept {
            "Accept"
        } else {
            "Reject"
        }
        .into();
    }
    if id.contains("/compare/") {
        return match r("choice") % 7 {
            0..=2 => "Agent 1",
            3..=5 => "Agent 2",
            _ => "Neither",
        }
        .into();
    }
    String::new()
}

fn main() -> Result<()> {
    let dir = fixtures();
    let work = tempfile::tempdir()?;
    let data = DataDir::new(work.path().join("data"));
    for d in [Dataset::Redial, Dataset::Reddit, Dataset::Imdb] {
        ingest(d, &dir.join(format!("raw/{}.jsonl", d.name())), &data, INGEST_SEED)?;
    }
    ingest(Dataset::Movielens, &dir.join("raw/movielens"), &data, INGEST_SEED)?;

    let config = dir.join("replay.toml");
    let bytes = std::fs::read(&config)?;
    let cfg = Config::load(&config)?;
    let titles = titles()?;
    let backend = ScriptedBackend::new("scripted", move |req| Ok(respond(req, &titles)));
    let gateway = Arc::new(Gateway::new(Arc::new(backend)));
    let opts = RunOptions {
        tasks: Task::ALL.to_vec(),
        baseline: None,
        config,
        seed: SEED,
        explanations: true,
        reasons: false,
        data: data.root().to_path_buf(),
        out: work.path().join("run"),
    };
    runner::run_with(&opts, &cfg, &bytes, gateway)?;

    let mut entries = Vec::new();
    for f in io::files_with_extension(&opts.out.join("replies"), "jsonl")? {
        for e in io::read_jsonl::<ReplyLogEntry>(&f, REPLIES_SCHEMA)? {
            if let Some(text) = e.raw_text {
                entries.push(serde_json::json!({ "key": e.key, "case_id": e.case_id, "text": text }));
            }
        }
    }
    entries.sort_by(|a, b| a["key"].as_str().cmp(&b["key"].as_str()));
    entries.dedup_by(|a, b| a["key"] == b["key"]);
    let mut out = String::new();
    for e in &entries {
        out.push_str(&serde_json::to_string(e)?);
        out.push('\n');
    }
    io::write_atomic(&dir.join("replay.jsonl"), out.as_bytes())?;
    println!("recorded {} replies", entries.len());
    Ok(())
}

mod common;

use std::process::Command;

use common::{check_golden, full_run, ingest_mini, read_tree, replay_config};
use usersim::manifest;
use usersim::runner;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_usersim"))
}

#[test]
fn replay_runs_are_byte_identical_and_match_golden() {
    let tmp = tempfile::tempdir().unwrap();
    let data = ingest_mini(&tmp.path().join("data"));
    let a = full_run(data.root(), &tmp.path().join("a"));
    full_run(data.root(), &tmp.path().join("b"));
    let ta = read_tree(&tmp.path().join("a"));
    let tb = read_tree(&tmp.path().join("b"));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (k, v) in &ta {
        assert!(tb[k] == *v, "{k} differs between runs");
    }
    assert!(
        a.reports.iter().all(|r| r.counts.failures == 0),
        "replay fixture misses prompts"
    );
    check_golden(&tmp.path().join("a")).unwrap();
}

#[test]
fn report_rerenders_identically_and_verify_catches_edits() {
    let tmp = tempfile::tempdir().unwrap();
    let data = ingest_mini(&tmp.path().join("data"));
    let out = tmp.path().join("run");
    full_run(data.root(), &out);
    let before = read_tree(&out);
    runner::rerender(&out).unwrap();
    assert_eq!(before, read_tree(&out));
    assert!(manifest::verify(&out).unwrap().ok());

    std::fs::write(out.join("tables/t1_entropy.csv"), "Generator\nHuman\n").unwrap();
    std::fs::write(out.join("charts/extra.csv"), "x\n").unwrap();
    std::fs::remove_file(out.join("reports/t4_vanilla_reddit.json")).unwrap();
    let v = manifest::verify(&out).unwrap();
    assert_eq!(v.mismatched, ["tables/t1_entropy.csv"]);
    assert_eq!(v.missing, ["reports/t4_vanilla_reddit.json"]);
    assert_eq!(v.unexpected, ["charts/extra.csv"]);
}

#[test]
fn manifest_has_no_absolute_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let data = ingest_mini(&tmp.path().join("data"));
    let out = tmp.path().join("run");
    let summary = full_run(data.root(), &out);
    let text = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(!text.contains(tmp.path().to_str().unwrap()));
    assert_eq!(summary.manifest.command.config_file, "replay.toml");
    assert_eq!(summary.manifest.templates.len(), 12);
    assert!(summary.manifest.datasets.contains_key("movielens"));
}

#[test]
fn cli_rerun_of_one_task_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let data = ingest_mini(&tmp.path().join("data"));
    for out in ["x", "y"] {
        let st = bin()
            .args(["run", "--task", "t2", "--baseline", "di-pp", "--backend"])
            .arg(replay_config())
            .args(["--seed", "7", "--data"])
            .arg(data.root())
            .arg("--out")
            .arg(tmp.path().join(out))
            .output()
            .unwrap();
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    }
    let x = read_tree(&tmp.path().join("x"));
    assert_eq!(x, read_tree(&tmp.path().join("y")));
    assert!(x.contains_key("reports/t2_di-pp_popular.json"));
    let notes = String::from_utf8(x["tables/NOTES.txt"].clone()).unwrap();
    assert!(notes.contains("t1_entropy"), "{notes}");

    let v = bin().arg("verify").arg(tmp.path().join("x")).output().unwrap();
    assert!(v.status.success());
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();

    let o = bin().args(["run", "--bogus"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));

    let o = bin()
        .args(["ingest", "movielens", "missing.csv", "--data"])
        .arg(tmp.path().join("d"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));

    let empty = tmp.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let o = bin().arg("report").arg(&empty).output().unwrap();
    assert_eq!(o.status.code(), Some(1));

    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[backend]\nkind = \"http\"\n").unwrap();
    let o = bin()
        .args(["run", "--task", "t4", "--backend"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.toml"));

    let o = bin()
        .args(["run", "--task", "t4", "--baseline", "di", "--backend"])
        .arg(replay_config())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));

    let o = bin().arg("verify").arg(&empty).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

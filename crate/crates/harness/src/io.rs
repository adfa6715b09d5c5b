//! JSONL files, hashing and atomic writes.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Version of every JSONL and JSON file the harness writes.
pub const SCHEMA_VERSION: u32 = 1;

/// First line of every JSONL data file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonlHeader {
    pub schema: String,
    pub schema_version: u32,
}

impl JsonlHeader {
    pub fn new(schema: &str) -> Self {
        JsonlHeader {
            schema: schema.to_string(),
            schema_version: SCHEMA_VERSION,
        }
    }
}

pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(bytes))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let tmp = tmp_sibling(path);
    {
        let mut f = File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all().ok();
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))
}

fn tmp_sibling(path: &Path) -> PathBuf {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.{}.{n}.tmp", std::process::id()))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

/// Serializes a header line followed by one line per record.
pub fn jsonl_bytes<'a, T: Serialize + 'a>(schema: &str, records: impl IntoIterator<Item = &'a T>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    serde_json::to_writer(&mut out, &JsonlHeader::new(schema))?;
    out.push(b'\n');
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    schema: &str,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    write_atomic(path, &jsonl_bytes(schema, records)?)
}

/// Reads a file written by [`write_jsonl`], checking the header.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(f).lines();
    let header = lines.next().with_context(|| format!("{} is empty", path.display()))??;
    let header: JsonlHeader =
        serde_json::from_str(&header).with_context(|| format!("{}: missing schema header", path.display()))?;
    if header.schema != schema {
        bail!("{}: expected schema {schema}, found {}", path.display(), header.schema);
    }
    if header.schema_version != SCHEMA_VERSION {
        bail!(
            "{}: schema version {} is not supported (expected {SCHEMA_VERSION})",
            path.display(),
            header.schema_version
        );
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 2))?);
    }
    Ok(out)
}

/// Plain JSONL without a header, one value per non-blank line. Returns the
/// values with their 1-based line numbers; undecodable lines are reported
/// through `on_error` and skipped.
pub fn read_plain_jsonl<T: DeserializeOwned>(
    path: &Path,
    mut on_error: impl FnMut(usize, serde_json::Error),
) -> Result<Vec<(usize, T)>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(v) => out.push((i + 1, v)),
            Err(e) => on_error(i + 1, e),
        }
    }
    Ok(out)
}

/// Appending JSONL writer, flushed per record.
pub struct JsonlAppender {
    out: BufWriter<File>,
}

impl JsonlAppender {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        Ok(JsonlAppender { out: BufWriter::new(f) })
    }

    pub fn append<T: Serialize>(&mut self, record: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

/// Files directly under `dir` with the given extension, sorted by name.
pub fn files_with_extension(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let p = entry?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == ext) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip_and_schema_check() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        write_jsonl(&p, "numbers", &[1u32, 2, 3]).unwrap();
        assert_eq!(read_jsonl::<u32>(&p, "numbers").unwrap(), [1, 2, 3]);
        assert!(read_jsonl::<u32>(&p, "letters").is_err());
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("{\"schema\":\"numbers\",\"schema_version\":1}\n"));
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.json");
        write_json(&p, &serde_json::json!({"k": 1})).unwrap();
        write_json(&p, &serde_json::json!({"k": 2})).unwrap();
        let names: Vec<_> = fs::read_dir(p.parent().unwrap())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names.len(), 1);
        assert_eq!(read_json::<serde_json::Value>(&p).unwrap()["k"], 2);
    }
}

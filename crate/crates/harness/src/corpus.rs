//! Reading the raw datasets and the ingested data directory.
//!
//! Inputs:
//!
//! * ReDial: the released JSONL conversations (a file, or a directory of
//!   `*.jsonl` files read in name order).
//! * Reddit: JSONL, one request per line:
//!   `{"id", "created_utc", "title", "flair", "text", "movies": [..],
//!   "comments": [{"id", "text", "movies": [..]}]}` where movies are
//!   `"Title (yyyy)"` strings.
//! * IMDB: JSONL, one review per line:
//!   `{"user_id", "movie", "review_title", "review_text"}`, in chronological
//!   order per user.
//! * MovieLens: `ratings.csv` (`userId,movieId,rating,...`) and `movies.csv`
//!   (`movieId,title,...`), given as the directory or the ratings file.
//!
//! Outputs in the data directory: `<dataset>.cases.jsonl`,
//! `<dataset>.catalog.json`, `<dataset>.ingest.json`, and for MovieLens
//! `movielens.ratings.json`.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use usersim_core::catalog::{Item, ItemCatalog, RatingStats, RatingTally};
use usersim_core::metrics::{entropy_of_counts, Stat};
use usersim_core::source::{
    build_catalog, imdb_case, reddit_case, redial_case, Dataset, ImdbReview, IngestCounters, KeywordRequestFilter,
    RedditComment, RedditPost, RedialConversation, RedialMessage, SourceCase,
};

use crate::io::{self, SCHEMA_VERSION};

pub const CASES_SCHEMA: &str = "usersim.cases";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub schema_version: u32,
    pub dataset: Dataset,
    pub input_sha256: String,
    pub counters: IngestCounters,
    /// Entropy of the human item distribution (one mention per entry and
    /// item). Absent for MovieLens.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_entropy: Option<Stat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distinct_items: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogFile {
    pub schema_version: u32,
    pub dataset: Dataset,
    pub catalog: ItemCatalog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingsFile {
    pub schema_version: u32,
    pub stats: RatingStats,
}

fn input_files(path: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    if !path.exists() {
        bail!("input path {} does not exist", path.display());
    }
    if path.is_dir() {
        let files = io::files_with_extension(path, ext)?;
        if files.is_empty() {
            bail!("no *.{ext} files in {}", path.display());
        }
        Ok(files)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

fn hash_inputs(files: &[PathBuf]) -> Result<String> {
    let mut all = String::new();
    for f in files {
        all.push_str(&io::sha256_file(f)?);
    }
    Ok(if files.len() == 1 { all } else { io::sha256_hex(all) })
}

fn malformed(counters: &mut IngestCounters, file: &Path, line: usize, err: impl std::fmt::Display) {
    log::warn!("{}:{line}: skipping malformed record: {err}", file.display());
    counters.skip("malformed_record");
}

// ---------------------------------------------------------------- ReDial

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawRedial {
    conversation_id: serde_json::Value,
    initiator_worker_id: i64,
    #[serde(default)]
    movie_mentions: serde_json::Value,
    messages: Vec<RawRedialMessage>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawRedialMessage {
    sender_worker_id: i64,
    text: String,
}

fn id_string(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn redial_conversation(raw: RawRedial) -> Option<RedialConversation> {
    let movie_mentions = match raw.movie_mentions {
        serde_json::Value::Object(m) => m
            .into_iter()
            .filter_map(|(k, v)| v.as_str().map(|s| (k, s.to_string())))
            .collect(),
        // Conversations without mentions carry an empty list.
        _ => BTreeMap::new(),
    };
    Some(RedialConversation {
        conversation_id: id_string(&raw.conversation_id)?,
        initiator_worker_id: raw.initiator_worker_id,
        movie_mentions,
        messages: raw
            .messages
            .into_iter()
            .map(|m| RedialMessage {
                sender_worker_id: m.sender_worker_id,
                text: m.text,
            })
            .collect(),
    })
}

pub fn read_redial(path: &Path, counters: &mut IngestCounters) -> Result<(Vec<SourceCase>, String)> {
    let files = input_files(path, "jsonl")?;
    let mut cases = Vec::new();
    for file in &files {
        let mut errors = Vec::new();
        let raws = io::read_plain_jsonl::<RawRedial>(file, |line, e| errors.push((line, e)))?;
        for (line, e) in errors {
            malformed(counters, file, line, e);
        }
        for (line, raw) in raws {
            match redial_conversation(raw) {
                Some(conv) => cases.extend(redial_case(&conv, counters)),
                None => malformed(counters, file, line, "conversationId is not a string or number"),
            }
        }
    }
    Ok((cases, hash_inputs(&files)?))
}

// ---------------------------------------------------------------- Reddit

#[derive(Deserialize)]
struct RawRedditComment {
    id: serde_json::Value,
    #[serde(alias = "body")]
    text: String,
    #[serde(default)]
    movies: Vec<String>,
}

#[derive(Deserialize)]
struct RawRedditPost {
    id: serde_json::Value,
    #[serde(default)]
    created_utc: Option<f64>,
    #[serde(default)]
    title: Option<String>,
    #[serde(default, alias = "link_flair_text")]
    flair: Option<String>,
    #[serde(alias = "selftext")]
    text: String,
    #[serde(default)]
    movies: Vec<String>,
    #[serde(default)]
    comments: Vec<RawRedditComment>,
}

pub fn read_reddit(path: &Path, seed: u64, counters: &mut IngestCounters) -> Result<(Vec<SourceCase>, String)> {
    let files = input_files(path, "jsonl")?;
    let filter = KeywordRequestFilter::default();
    let mut cases = Vec::new();
    for file in &files {
        let mut errors = Vec::new();
        let raws = io::read_plain_jsonl::<RawRedditPost>(file, |line, e| errors.push((line, e)))?;
        for (line, e) in errors {
            malformed(counters, file, line, e);
        }
        for (line, raw) in raws {
            let Some(id) = id_string(&raw.id) else {
                malformed(counters, file, line, "id is not a string or number");
                continue;
            };
            if raw.created_utc.is_none() {
                log::warn!("{}:{line}: request {id} has no timestamp", file.display());
            }
            let post = RedditPost {
                id,
                created_utc: raw.created_utc.map(|t| t.floor() as i64),
                title: raw.title,
                flair: raw.flair,
                text: raw.text,
                movies: raw.movies,
                comments: raw
                    .comments
                    .into_iter()
                    .map(|c| RedditComment {
                        id: id_string(&c.id).unwrap_or_default(),
                        text: c.text,
                        movies: c.movies,
                    })
                    .collect(),
            };
            cases.extend(reddit_case(&post, seed, &filter, counters));
        }
    }
    Ok((cases, hash_inputs(&files)?))
}

// ---------------------------------------------------------------- IMDB

#[derive(Deserialize)]
struct RawImdbReview {
    user_id: serde_json::Value,
    movie: String,
    #[serde(alias = "title")]
    review_title: String,
    #[serde(alias = "review", alias = "content")]
    review_text: String,
}

pub fn read_imdb(path: &Path, counters: &mut IngestCounters) -> Result<(Vec<SourceCase>, String)> {
    let files = input_files(path, "jsonl")?;
    let mut order: Vec<String> = Vec::new();
    let mut by_user: HashMap<String, Vec<ImdbReview>> = HashMap::new();
    for file in &files {
        let mut errors = Vec::new();
        let raws = io::read_plain_jsonl::<RawImdbReview>(file, |line, e| errors.push((line, e)))?;
        for (line, e) in errors {
            malformed(counters, file, line, e);
        }
        for (line, raw) in raws {
            let Some(user_id) = id_string(&raw.user_id) else {
                malformed(counters, file, line, "user_id is not a string or number");
                continue;
            };
            let reviews = by_user.entry(user_id.clone()).or_insert_with(|| {
                order.push(user_id.clone());
                Vec::new()
            });
            reviews.push(ImdbReview {
                user_id,
                movie: raw.movie,
                review_title: raw.review_title,
                review_text: raw.review_text,
            });
        }
    }
    let cases = order
        .iter()
        .filter_map(|u| imdb_case(u, &by_user[u], counters))
        .collect();
    Ok((cases, hash_inputs(&files)?))
}

// ---------------------------------------------------------------- MovieLens

#[derive(Deserialize)]
struct RawRating {
    #[serde(rename = "movieId")]
    movie_id: String,
    rating: f64,
}

#[derive(Deserialize)]
struct RawMovie {
    #[serde(rename = "movieId")]
    movie_id: String,
    title: String,
}

/// Resolves `ratings.csv` and `movies.csv` from a directory or from the
/// ratings file itself.
fn movielens_paths(path: &Path) -> Result<(PathBuf, PathBuf)> {
    let ratings = if path.is_dir() {
        path.join("ratings.csv")
    } else {
        path.to_path_buf()
    };
    if !ratings.is_file() {
        bail!("ratings file {} does not exist", ratings.display());
    }
    let movies = ratings.with_file_name("movies.csv");
    if !movies.is_file() {
        bail!("movies file {} does not exist", movies.display());
    }
    Ok((ratings, movies))
}

pub fn read_movielens(path: &Path, counters: &mut IngestCounters) -> Result<(RatingStats, String)> {
    let (ratings_path, movies_path) = movielens_paths(path)?;
    let mut movies: HashMap<String, Item> = HashMap::new();
    let mut rdr = csv::Reader::from_path(&movies_path).with_context(|| format!("opening {}", movies_path.display()))?;
    for row in rdr.deserialize::<RawMovie>() {
        let m = match row {
            Ok(m) => m,
            Err(e) => {
                malformed(counters, &movies_path, 0, e);
                continue;
            }
        };
        match Item::parse(m.title.trim()) {
            Ok(item) => {
                movies.insert(m.movie_id.clone(), item.with_source_id("movielens", m.movie_id));
            }
            Err(usersim_core::catalog::CatalogError::TooRecent { .. }) => counters.skip("item_after_2021"),
            Err(_) => counters.skip("item_unparseable"),
        }
    }

    let mut tallies: BTreeMap<String, RatingTally> = BTreeMap::new();
    let mut rdr =
        csv::Reader::from_path(&ratings_path).with_context(|| format!("opening {}", ratings_path.display()))?;
    for (i, row) in rdr.deserialize::<RawRating>().enumerate() {
        let r = match row {
            Ok(r) => r,
            Err(e) => {
                malformed(counters, &ratings_path, i + 2, e);
                continue;
            }
        };
        if !movies.contains_key(&r.movie_id) {
            counters.skip("rating_for_unadmitted_movie");
            continue;
        }
        if tallies.entry(r.movie_id).or_default().add(r.rating).is_err() {
            log::warn!(
                "{}:{}: rating {} is outside 0.5..=5",
                ratings_path.display(),
                i + 2,
                r.rating
            );
            counters.skip("rating_out_of_scale");
            continue;
        }
        counters.admitted += 1;
    }
    let stats = RatingStats::from_tallies(tallies.iter().map(|(id, t)| (&movies[id], *t)))
        .with_context(|| format!("{}: no usable ratings", ratings_path.display()))?;
    Ok((stats, hash_inputs(&[ratings_path, movies_path])?))
}

// ---------------------------------------------------------------- data dir

/// An ingested data directory.
#[derive(Debug, Clone)]
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DataDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn cases_path(&self, d: Dataset) -> PathBuf {
        self.root.join(format!("{}.cases.jsonl", d.name()))
    }

    pub fn catalog_path(&self, d: Dataset) -> PathBuf {
        self.root.join(format!("{}.catalog.json", d.name()))
    }

    pub fn summary_path(&self, d: Dataset) -> PathBuf {
        self.root.join(format!("{}.ingest.json", d.name()))
    }

    pub fn ratings_path(&self) -> PathBuf {
        self.root.join("movielens.ratings.json")
    }

    pub fn has(&self, d: Dataset) -> bool {
        match d {
            Dataset::Movielens => self.ratings_path().is_file(),
            _ => self.cases_path(d).is_file(),
        }
    }

    pub fn cases(&self, d: Dataset) -> Result<Vec<SourceCase>> {
        io::read_jsonl(&self.cases_path(d), CASES_SCHEMA)
    }

    pub fn catalog(&self, d: Dataset) -> Result<ItemCatalog> {
        Ok(io::read_json::<CatalogFile>(&self.catalog_path(d))?.catalog)
    }

    pub fn ratings(&self) -> Result<RatingStats> {
        Ok(io::read_json::<RatingsFile>(&self.ratings_path())?.stats)
    }

    pub fn summary(&self, d: Dataset) -> Result<IngestSummary> {
        io::read_json(&self.summary_path(d))
    }

    /// Every file that exists for a dataset, for hashing into manifests.
    pub fn files(&self, d: Dataset) -> Vec<PathBuf> {
        [
            self.cases_path(d),
            self.catalog_path(d),
            self.summary_path(d),
            self.ratings_path(),
        ]
        .into_iter()
        .filter(|p| {
            p.is_file()
                && (d == Dataset::Movielens)
                    == p.file_name()
                        .is_some_and(|n| n.to_string_lossy().starts_with("movielens"))
        })
        .collect()
    }
}

/// Dataset-level human entropy: one mention per entry and item.
pub fn human_entropy(catalog: &ItemCatalog) -> Stat {
    Stat::from_option(entropy_of_counts(catalog.counts().values().copied()).ok())
}

/// Ingests one dataset into `data`, returning the summary written.
pub fn ingest(dataset: Dataset, input: &Path, data: &DataDir, seed: u64) -> Result<IngestSummary> {
    let mut counters = IngestCounters::default();
    if dataset == Dataset::Movielens {
        let (stats, hash) = read_movielens(input, &mut counters)?;
        io::write_json(
            &data.ratings_path(),
            &RatingsFile {
                schema_version: SCHEMA_VERSION,
                stats,
            },
        )?;
        let summary = IngestSummary {
            schema_version: SCHEMA_VERSION,
            dataset,
            input_sha256: hash,
            counters,
            human_entropy: None,
            distinct_items: None,
        };
        io::write_json(&data.summary_path(dataset), &summary)?;
        return Ok(summary);
    }

    let (cases, hash) = match dataset {
        Dataset::Redial => read_redial(input, &mut counters)?,
        Dataset::Reddit => read_reddit(input, seed, &mut counters)?,
        Dataset::Imdb => read_imdb(input, &mut counters)?,
        Dataset::Movielens => unreachable!(),
    };
    if cases.is_empty() {
        bail!(
            "{}: no {} entries survived preprocessing",
            input.display(),
            dataset.name()
        );
    }
    let catalog = build_catalog(&cases);
    io::write_jsonl(&data.cases_path(dataset), CASES_SCHEMA, &cases)?;
    let summary = IngestSummary {
        schema_version: SCHEMA_VERSION,
        dataset,
        input_sha256: hash,
        counters,
        human_entropy: Some(human_entropy(&catalog)),
        distinct_items: Some(catalog.len()),
    };
    io::write_json(
        &data.catalog_path(dataset),
        &CatalogFile {
            schema_version: SCHEMA_VERSION,
            dataset,
            catalog,
        },
    )?;
    io::write_json(&data.summary_path(dataset), &summary)?;
    Ok(summary)
}

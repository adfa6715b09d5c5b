//! Normalized dataset entries and the per-dataset admission rules.
//!
//! Raw files are decoded elsewhere into the plain record types below; the
//! functions here decide which records become [`SourceCase`]s.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{CatalogError, Item, ItemCatalog};
use crate::seed::{self, FIRST_SECOND_OF_2022};
use crate::title::CanonicalKey;

/// Version tag written into every case file.
pub const CASE_SCHEMA_VERSION: u32 = 1;

/// Minimum number of surviving reviews for an IMDB user.
pub const MIN_IMDB_REVIEWS: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Redial,
    Reddit,
    Movielens,
    Imdb,
}

impl Dataset {
    pub const ALL: [Dataset; 4] = [Dataset::Redial, Dataset::Reddit, Dataset::Movielens, Dataset::Imdb];

    pub fn name(self) -> &'static str {
        match self {
            Dataset::Redial => "redial",
            Dataset::Reddit => "reddit",
            Dataset::Movielens => "movielens",
            Dataset::Imdb => "imdb",
        }
    }

    /// Column label used in tables.
    pub fn label(self) -> &'static str {
        match self {
            Dataset::Redial => "ReDial",
            Dataset::Reddit => "Reddit",
            Dataset::Movielens => "MovieLens",
            Dataset::Imdb => "IMDB",
        }
    }

    pub fn parse(s: &str) -> Option<Dataset> {
        Dataset::ALL.into_iter().find(|d| d.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub item: Item,
    pub review_title: String,
    pub review_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub text: String,
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HistoryPayload {
    None,
    Reviews { reviews: Vec<Review> },
    Timestamp { utc: i64 },
}

/// One dataset entry after preprocessing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceCase {
    pub id: String,
    pub dataset: Dataset,
    /// Distinct items in order of first mention.
    pub mentioned_items: Vec<Item>,
    pub history: HistoryPayload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_text: Option<String>,
    /// Character count of `request_text`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_length: Option<usize>,
    /// Items named in the request itself (Reddit).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub request_items: Vec<Item>,
    /// Retained comments; exactly one for Reddit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread_comments: Option<Vec<Comment>>,
}

impl SourceCase {
    pub fn keys(&self) -> impl Iterator<Item = &CanonicalKey> {
        self.mentioned_items.iter().map(|i| &i.key)
    }

    pub fn reviews(&self) -> &[Review] {
        match &self.history {
            HistoryPayload::Reviews { reviews } => reviews,
            _ => &[],
        }
    }

    pub fn timestamp(&self) -> Option<i64> {
        match self.history {
            HistoryPayload::Timestamp { utc } => Some(utc),
            _ => None,
        }
    }

    pub fn head_comment(&self) -> Option<&Comment> {
        self.thread_comments.as_ref().and_then(|c| c.first())
    }
}

/// Admission and rejection tallies for one ingestion pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestCounters {
    pub admitted: u64,
    pub skipped: BTreeMap<String, u64>,
}

impl IngestCounters {
    pub fn skip(&mut self, reason: &str) {
        *self.skipped.entry(reason.to_string()).or_insert(0) += 1;
    }

    pub fn skipped(&self, reason: &str) -> u64 {
        self.skipped.get(reason).copied().unwrap_or(0)
    }

    fn admit_item(&mut self, raw: &str) -> Option<Item> {
        match Item::parse(raw) {
            Ok(item) => Some(item),
            Err(CatalogError::TooRecent { .. }) => {
                self.skip("item_after_2021");
                None
            }
            Err(_) => {
                self.skip("item_unparseable");
                None
            }
        }
    }
}

fn push_distinct(items: &mut Vec<Item>, seen: &mut BTreeSet<CanonicalKey>, item: Item) {
    if seen.insert(item.key.clone()) {
        items.push(item);
    }
}

/// Builds the catalog of everything the cases mention, counting one mention
/// per case and item.
pub fn build_catalog<'a>(cases: impl IntoIterator<Item = &'a SourceCase>) -> ItemCatalog {
    let mut catalog = ItemCatalog::new();
    for case in cases {
        for item in &case.mentioned_items {
            catalog.insert_mentioned(item.clone());
        }
    }
    catalog
}

// --------------------------------------------------------------------------
// ReDial
// --------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RedialMessage {
    pub sender_worker_id: i64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RedialConversation {
    pub conversation_id: String,
    /// The seeker.
    pub initiator_worker_id: i64,
    /// Movie id → `"Title (yyyy)"`.
    pub movie_mentions: BTreeMap<String, String>,
    pub messages: Vec<RedialMessage>,
}

/// Seeker-side `@<id>` mentions in utterance order, deduplicated. Returns
/// `None` when the seeker mentions no admissible movie.
pub fn redial_case(conv: &RedialConversation, counters: &mut IngestCounters) -> Option<SourceCase> {
    let mut items = Vec::new();
    let mut seen = BTreeSet::new();
    for msg in conv
        .messages
        .iter()
        .filter(|m| m.sender_worker_id == conv.initiator_worker_id)
    {
        for id in mention_ids(&msg.text) {
            let Some(name) = conv.movie_mentions.get(id) else {
                counters.skip("mention_without_title");
                continue;
            };
            if let Some(item) = counters.admit_item(name) {
                push_distinct(&mut items, &mut seen, item.with_source_id("redial", id));
            }
        }
    }
    if items.is_empty() {
        counters.skip("no_seeker_mentions");
        return None;
    }
    counters.admitted += 1;
    Some(SourceCase {
        id: alloc::format!("redial:{}", conv.conversation_id),
        dataset: Dataset::Redial,
        mentioned_items: items,
        history: HistoryPayload::None,
        request_text: None,
        request_length: None,
        request_items: Vec::new(),
        thread_comments: None,
    })
}

/// `@12345` tokens inside a ReDial utterance.
fn mention_ids(text: &str) -> impl Iterator<Item = &str> {
    text.match_indices('@').filter_map(move |(at, _)| {
        let rest = &text[at + 1..];
        let end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
        (end > 0).then(|| &rest[..end])
    })
}

// --------------------------------------------------------------------------
// Reddit
// --------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RedditComment {
    pub id: String,
    pub text: String,
    pub movies: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RedditPost {
    pub id: String,
    pub created_utc: Option<i64>,
    pub title: Option<String>,
    pub flair: Option<String>,
    pub text: String,
    pub movies: Vec<String>,
    pub comments: Vec<RedditComment>,
}

/// Decides whether a Reddit request is about movies.
pub trait RequestFilter {
    fn is_movie_request(&self, post: &RedditPost, request_items: &[Item]) -> bool;
}

impl<F: Fn(&RedditPost, &[Item]) -> bool> RequestFilter for F {
    fn is_movie_request(&self, post: &RedditPost, request_items: &[Item]) -> bool {
        self(post, request_items)
    }
}

/// Keyword and flair rule: a flair naming TV, shows, books or games rejects
/// the request; otherwise it is kept when it names a movie or uses a movie
/// word.
#[derive(Debug, Clone)]
pub struct KeywordRequestFilter {
    pub movie_terms: Vec<String>,
    pub rejected_flair_terms: Vec<String>,
}

impl Default for KeywordRequestFilter {
    fn default() -> Self {
        let own = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        KeywordRequestFilter {
            movie_terms: own(&["movie", "film", "flick", "cinema", "watch"]),
            rejected_flair_terms: own(&["tv", "show", "series", "book", "game", "anime"]),
        }
    }
}

impl RequestFilter for KeywordRequestFilter {
    fn is_movie_request(&self, post: &RedditPost, request_items: &[Item]) -> bool {
        if let Some(flair) = &post.flair {
            let flair = flair.to_lowercase();
            let words: Vec<&str> = flair.split(|c: char| !c.is_alphanumeric()).collect();
            if self.rejected_flair_terms.iter().any(|t| words.iter().any(|w| w == t)) {
                return false;
            }
        }
        if !request_items.is_empty() {
            return true;
        }
        let mut text = post.text.to_lowercase();
        if let Some(t) = &post.title {
            text.push(' ');
            text.push_str(&t.to_lowercase());
        }
        self.movie_terms.iter().any(|t| text.contains(t.as_str()))
    }
}

/// Applies, in order: drop posts after 2021, drop comments without admitted
/// movie mentions, drop non-movie requests, then keep one head comment drawn
/// from a stream seeded by `(seed, post id)`.
pub fn reddit_case(
    post: &RedditPost,
    seed: u64,
    filter: &dyn RequestFilter,
    counters: &mut IngestCounters,
) -> Option<SourceCase> {
    let Some(utc) = post.created_utc else {
        counters.skip("missing_timestamp");
        return None;
    };
    if utc >= FIRST_SECOND_OF_2022 {
        counters.skip("post_after_2021");
        return None;
    }

    let mut comments: Vec<Comment> = Vec::new();
    for c in &post.comments {
        let mut items = Vec::new();
        let mut seen = BTreeSet::new();
        for m in &c.movies {
            if let Some(item) = counters.admit_item(m) {
                push_distinct(&mut items, &mut seen, item);
            }
        }
        if items.is_empty() {
            counters.skip("comment_without_mentions");
            continue;
        }
        comments.push(Comment {
            id: c.id.clone(),
            text: c.text.clone(),
            items,
        });
    }

    let mut request_items = Vec::new();
    let mut seen = BTreeSet::new();
    for m in &post.movies {
        if let Some(item) = counters.admit_item(m) {
            push_distinct(&mut request_items, &mut seen, item);
        }
    }

    if !filter.is_movie_request(post, &request_items) {
        counters.skip("not_about_movies");
        return None;
    }
    if comments.is_empty() {
        counters.skip("no_surviving_comments");
        return None;
    }

    let mut rng = seed::case_rng(seed, &post.id);
    let head = comments.swap_remove(rng.random_range(0..comments.len()));

    let mut mentioned = request_items.clone();
    for item in &head.items {
        push_distinct(&mut mentioned, &mut seen, item.clone());
    }
    counters.admitted += 1;
    Some(SourceCase {
        id: alloc::format!("reddit:{}", post.id),
        dataset: Dataset::Reddit,
        mentioned_items: mentioned,
        history: HistoryPayload::Timestamp { utc },
        request_length: Some(post.text.chars().count()),
        request_text: Some(post.text.clone()),
        request_items,
        thread_comments: Some(alloc::vec![head]),
    })
}

// --------------------------------------------------------------------------
// IMDB
// --------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImdbReview {
    pub user_id: String,
    /// `"Title (yyyy)"`.
    pub movie: String,
    pub review_title: String,
    pub review_text: String,
}

/// One case per user with at least [`MIN_IMDB_REVIEWS`] surviving reviews.
/// `reviews` must hold a single user's reviews in chronological order.
pub fn imdb_case(user_id: &str, reviews: &[ImdbReview], counters: &mut IngestCounters) -> Option<SourceCase> {
    let mut kept = Vec::new();
    let mut items = Vec::new();
    let mut seen = BTreeSet::new();
    for r in reviews {
        let Some(item) = counters.admit_item(&r.movie) else {
            continue;
        };
        push_distinct(&mut items, &mut seen, item.clone());
        kept.push(Review {
            item,
            review_title: r.review_title.clone(),
            review_text: r.review_text.clone(),
        });
    }
    if kept.len() < MIN_IMDB_REVIEWS {
        counters.skip("user_below_min_reviews");
        return None;
    }
    counters.admitted += 1;
    Some(SourceCase {
        id: alloc::format!("imdb:{user_id}"),
        dataset: Dataset::Imdb,
        mentioned_items: items,
        history: HistoryPayload::Reviews { reviews: kept },
        request_text: None,
        request_length: None,
        request_items: Vec::new(),
        thread_comments: None,
    })
}

//! Turning raw simulator replies into structured outcomes.
//!
//! Parsers never modify the reply text. A reply that does not fit the task
//! contract comes back as an invalid [`ParsedOutcome`] (no payload), which
//! is counted but excluded from metrics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::catalog::ItemCatalog;
use crate::persona::AgentSlot;
use crate::title::{self, normalized_edit_distance, CanonicalKey};

/// Default fuzzy-match bound on normalized edit distance between keys.
pub const DEFAULT_FUZZY_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    ItemList,
    Binary,
    AcceptReject,
    AgentChoice,
    FreeText,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemMention {
    Matched(CanonicalKey),
    /// Extracted text that matched nothing in the catalog.
    Unmatched(String),
}

impl ItemMention {
    pub fn key(&self) -> Option<&CanonicalKey> {
        match self {
            ItemMention::Matched(k) => Some(k),
            ItemMention::Unmatched(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryAnswer {
    Yes,
    No,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentChoice {
    Agent1,
    Agent2,
    Neither,
}

/// An agent choice after undoing the random slot assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    Positive,
    Negative,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    ItemList {
        items: Vec<ItemMention>,
    },
    Binary {
        answer: BinaryAnswer,
    },
    AcceptReject {
        feedback: Feedback,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        explanation: Option<String>,
    },
    AgentChoice {
        choice: AgentChoice,
    },
    FreeText {
        text: String,
    },
}

impl Payload {
    pub fn kind(&self) -> OutcomeKind {
        match self {
            Payload::ItemList { .. } => OutcomeKind::ItemList,
            Payload::Binary { .. } => OutcomeKind::Binary,
            Payload::AcceptReject { .. } => OutcomeKind::AcceptReject,
            Payload::AgentChoice { .. } => OutcomeKind::AgentChoice,
            Payload::FreeText { .. } => OutcomeKind::FreeText,
        }
    }
}

/// Outcome of parsing one reply. Valid exactly when a payload is present,
/// and the payload always matches `kind`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedOutcome {
    kind: OutcomeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    payload: Option<Payload>,
}

impl ParsedOutcome {
    pub fn valid(payload: Payload) -> Self {
        ParsedOutcome {
            kind: payload.kind(),
            payload: Some(payload),
        }
    }

    pub fn invalid(kind: OutcomeKind) -> Self {
        ParsedOutcome { kind, payload: None }
    }

    pub fn kind(&self) -> OutcomeKind {
        self.kind
    }

    pub fn is_valid(&self) -> bool {
        self.payload.is_some()
    }

    pub fn payload(&self) -> Option<&Payload> {
        self.payload.as_ref()
    }

    pub fn items(&self) -> Option<&[ItemMention]> {
        match &self.payload {
            Some(Payload::ItemList { items }) => Some(items),
            _ => None,
        }
    }

    pub fn binary(&self) -> Option<BinaryAnswer> {
        match self.payload {
            Some(Payload::Binary { answer }) => Some(answer),
            _ => None,
        }
    }

    pub fn feedback(&self) -> Option<Feedback> {
        match self.payload {
            Some(Payload::AcceptReject { feedback, .. }) => Some(feedback),
            _ => None,
        }
    }

    pub fn explanation(&self) -> Option<&str> {
        match &self.payload {
            Some(Payload::AcceptReject { explanation, .. }) => explanation.as_deref(),
            _ => None,
        }
    }

    pub fn choice(&self) -> Option<AgentChoice> {
        match self.payload {
            Some(Payload::AgentChoice { choice }) => Some(choice),
            _ => None,
        }
    }

    pub fn text(&self) -> Option<&str> {
        match &self.payload {
            Some(Payload::FreeText { text }) => Some(text),
            _ => None,
        }
    }
}

// --------------------------------------------------------------------------
// Item lists
// --------------------------------------------------------------------------

/// Lookup structure over catalog keys: exact keys, per-year buckets for
/// fuzzy matching, and a title-only map for replies without years.
#[derive(Debug, Clone, Default)]
pub struct CatalogIndex {
    exact: BTreeSet<CanonicalKey>,
    by_year: BTreeMap<i32, Vec<CanonicalKey>>,
    by_title: BTreeMap<String, Vec<CanonicalKey>>,
}

impl CatalogIndex {
    pub fn from_keys<'a>(keys: impl IntoIterator<Item = &'a CanonicalKey>) -> Self {
        let mut index = CatalogIndex::default();
        for key in keys {
            if !index.exact.insert(key.clone()) {
                continue;
            }
            if let Some((title, year)) = title::split_title_year(key.as_str()) {
                index.by_year.entry(year).or_default().push(key.clone());
                index.by_title.entry(title.to_string()).or_default().push(key.clone());
            }
        }
        index
    }

    pub fn from_catalog(catalog: &ItemCatalog) -> Self {
        let keys: Vec<&CanonicalKey> = catalog.items().map(|i| &i.key).collect();
        Self::from_keys(keys)
    }

    pub fn len(&self) -> usize {
        self.exact.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exact.is_empty()
    }

    fn exact(&self, key: &CanonicalKey) -> bool {
        self.exact.contains(key)
    }

    /// Closest key of the same year within `threshold`; ties go to the
    /// lexicographically smaller key.
    fn fuzzy(&self, key: &CanonicalKey, year: i32, threshold: f64) -> Option<CanonicalKey> {
        let bucket = self.by_year.get(&year)?;
        let len = key.as_str().chars().count();
        let mut best: Option<(f64, &CanonicalKey)> = None;
        for cand in bucket {
            let clen = cand.as_str().chars().count();
            let longest = len.max(clen) as f64;
            if (len as f64 - clen as f64).abs() > threshold * longest {
                continue;
            }
            let d = normalized_edit_distance(key.as_str(), cand.as_str());
            if d <= threshold && best.is_none_or(|(bd, bk)| d < bd || (d == bd && cand < bk)) {
                best = Some((d, cand));
            }
        }
        best.map(|(_, k)| k.clone())
    }

    fn unique_title(&self, title_text: &str) -> Option<&CanonicalKey> {
        match self.by_title.get(title_text).map(Vec::as_slice) {
            Some([only]) => Some(only),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ItemListStats {
    pub extracted: usize,
    pub matched: usize,
    pub fuzzy: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<usize>,
}

impl ItemListStats {
    pub fn match_rate(&self) -> Option<f64> {
        (self.extracted > 0).then(|| self.matched as f64 / self.extracted as f64)
    }
}

const LEAD_WORDS: [&str; 10] = [
    "and", "or", "also", "then", "plus", "maybe", "perhaps", "like", "e", "g",
];

/// Strips list markers, quotes, markup and connective words from the front
/// of an extracted title, and trailing separators from its end.
fn clean_segment(seg: &str) -> String {
    let mut s = seg.trim();
    loop {
        let before = s;
        s = s.trim_start_matches(|c: char| {
            c.is_whitespace()
                || matches!(
                    c,
                    '-' | '*'
                        | '•'
                        | '·'
                        | '#'
                        | ','
                        | ';'
                        | '|'
                        | '>'
                        | ':'
                        | '.'
                        | ')'
                        | '"'
                        | '“'
                        | '”'
                        | '\''
                        | '_'
                        | '–'
                        | '—'
                )
        });
        // "1." / "2)" list numbering
        let digits = s.len() - s.trim_start_matches(|c: char| c.is_ascii_digit()).len();
        if digits > 0 && digits <= 3 {
            let rest = &s[digits..];
            if rest.starts_with('.') || rest.starts_with(')') || rest.starts_with(':') {
                s = &rest[1..];
            }
        }
        if let Some((first, rest)) = s.split_once(char::is_whitespace) {
            if LEAD_WORDS.contains(&first.to_lowercase().as_str()) {
                s = rest;
            }
        }
        if s == before {
            break;
        }
    }
    s.trim_end_matches(|c: char| c.is_whitespace() || matches!(c, '"' | '“' | '”' | '*' | '_' | '\'' | '<' | '['))
        .to_string()
}

/// `(yyyy)` groups: byte range of the group and the year.
fn year_groups(text: &str) -> Vec<(usize, usize, i32)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'(' {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j] == b' ' {
                j += 1;
            }
            let start = j;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            let end_digits = j;
            while j < bytes.len() && bytes[j] == b' ' {
                j += 1;
            }
            if end_digits - start == 4 && j < bytes.len() && bytes[j] == b')' {
                if let Ok(year) = text[start..end_digits].parse() {
                    out.push((i, j + 1, year));
                    i = j + 1;
                    continue;
                }
            }
        }
        i += 1;
    }
    out
}

/// Word-boundary suffixes of `title`, longest first.
fn suffixes(title: &str) -> Vec<&str> {
    let mut out = alloc::vec![title];
    for (i, c) in title.char_indices() {
        if c.is_whitespace() || c == ',' || c == ':' {
            let rest = title[i + c.len_utf8()..].trim_start();
            if !rest.is_empty() && out.last() != Some(&rest) {
                out.push(rest);
            }
        }
    }
    out
}

struct Matcher<'a> {
    index: &'a CatalogIndex,
    threshold: f64,
}

impl Matcher<'_> {
    fn resolve(&self, segment: &str, year: i32) -> Option<(CanonicalKey, bool)> {
        let candidates: Vec<CanonicalKey> = suffixes(segment)
            .into_iter()
            .filter_map(|s| title::normalize_title(s, year).ok())
            .collect();
        if let Some(k) = candidates.iter().find(|k| self.index.exact(k)) {
            return Some((k.clone(), false));
        }
        candidates
            .iter()
            .find_map(|k| self.index.fuzzy(k, year, self.threshold))
            .map(|k| (k, true))
    }
}

fn strip_markup(raw: &str) -> String {
    raw.replace("**", "").replace(['<', '>'], " ")
}

/// Extracts `Title (yyyy)` entries from a list-like reply and matches each
/// against the catalog: exact key first, then the closest same-year key
/// within `threshold` normalized edit distance. Replies that carry no years
/// at all fall back to unique title-only matches per line or comma item.
pub fn parse_item_list(
    raw: &str,
    expected_n: Option<usize>,
    index: &CatalogIndex,
    threshold: f64,
) -> (ParsedOutcome, ItemListStats) {
    let text = strip_markup(raw);
    let matcher = Matcher { index, threshold };
    let mut stats = ItemListStats {
        expected: expected_n,
        ..ItemListStats::default()
    };
    let mut items: Vec<ItemMention> = Vec::new();
    let mut seen: BTreeSet<ItemMention> = BTreeSet::new();
    let mut push = |m: ItemMention, items: &mut Vec<ItemMention>| {
        if seen.insert(m.clone()) {
            items.push(m);
        }
    };

    let groups = year_groups(&text);
    if !groups.is_empty() {
        let mut prev_end = 0;
        for (open, close, year) in groups {
            let span = &text[prev_end..open];
            prev_end = close;
            let span = span.rsplit(['\n', ';', '|']).next().unwrap_or(span);
            let segment = clean_segment(span);
            if segment.is_empty() {
                continue;
            }
            stats.extracted += 1;
            match matcher.resolve(&segment, year) {
                Some((key, fuzzy)) => {
                    stats.matched += 1;
                    stats.fuzzy += usize::from(fuzzy);
                    push(ItemMention::Matched(key), &mut items);
                }
                None => push(ItemMention::Unmatched(alloc::format!("{segment} ({year})")), &mut items),
            }
        }
    } else {
        for line in text.lines() {
            for entry in line.split([',', ';']) {
                let segment = clean_segment(entry.trim_end_matches(['.', '!', '?']));
                let Ok(norm) = title::normalize_title_text(&segment) else {
                    continue;
                };
                if let Some(key) = index.unique_title(&norm) {
                    stats.extracted += 1;
                    stats.matched += 1;
                    push(ItemMention::Matched(key.clone()), &mut items);
                }
            }
        }
    }

    let outcome = if stats.extracted == 0 {
        ParsedOutcome::invalid(OutcomeKind::ItemList)
    } else {
        ParsedOutcome::valid(Payload::ItemList { items })
    };
    (outcome, stats)
}

// --------------------------------------------------------------------------
// Single-token answers
// --------------------------------------------------------------------------

/// Leading alphabetic word (lowercased) and the text after it.
fn leading_word(raw: &str) -> (String, &str) {
    let s = raw.trim_start_matches(|c: char| !c.is_alphanumeric());
    let end = s.find(|c: char| !c.is_alphabetic()).unwrap_or(s.len());
    (s[..end].to_lowercase(), &s[end..])
}

pub fn parse_binary(raw: &str) -> ParsedOutcome {
    let (word, _) = leading_word(raw);
    match word.as_str() {
        "yes" => ParsedOutcome::valid(Payload::Binary {
            answer: BinaryAnswer::Yes,
        }),
        "no" => ParsedOutcome::valid(Payload::Binary {
            answer: BinaryAnswer::No,
        }),
        _ => ParsedOutcome::invalid(OutcomeKind::Binary),
    }
}

pub fn parse_accept_reject(raw: &str) -> ParsedOutcome {
    let (word, rest) = leading_word(raw);
    let feedback = match word.as_str() {
        "accept" => Feedback::Accept,
        "reject" => Feedback::Reject,
        _ => return ParsedOutcome::invalid(OutcomeKind::AcceptReject),
    };
    let rest = rest.trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '.' | ',' | '!' | ':' | '-' | ';'));
    let rest = rest.trim_end();
    ParsedOutcome::valid(Payload::AcceptReject {
        feedback,
        explanation: (!rest.is_empty()).then(|| rest.to_string()),
    })
}

/// Earliest of "agent 1", "agent 2" or "neither", case-insensitively.
pub fn parse_agent_choice(raw: &str) -> ParsedOutcome {
    let lower = raw.to_lowercase();
    let mut best: Option<(usize, AgentChoice)> = None;
    let mut consider = |at: usize, c: AgentChoice| {
        if best.is_none_or(|(b, _)| at < b) {
            best = Some((at, c));
        }
    };
    for (at, _) in lower.match_indices("agent") {
        let rest = lower[at + 5..].trim_start_matches([' ', '_', '-', '#']);
        let mut chars = rest.chars();
        let choice = match chars.next() {
            Some('1') => AgentChoice::Agent1,
            Some('2') => AgentChoice::Agent2,
            _ => continue,
        };
        if chars.next().is_some_and(|c| c.is_ascii_digit()) {
            continue;
        }
        consider(at, choice);
    }
    for (at, _) in lower.match_indices("neither") {
        let before_ok = lower[..at].chars().next_back().is_none_or(|c| !c.is_alphanumeric());
        let after_ok = lower[at + 7..].chars().next().is_none_or(|c| !c.is_alphanumeric());
        if before_ok && after_ok {
            consider(at, AgentChoice::Neither);
        }
    }
    match best {
        Some((_, choice)) => ParsedOutcome::valid(Payload::AgentChoice { choice }),
        None => ParsedOutcome::invalid(OutcomeKind::AgentChoice),
    }
}

/// Maps a slot choice back onto the recommendation it held.
pub fn debias(choice: AgentChoice, positive_slot: AgentSlot) -> Preference {
    match (choice, positive_slot) {
        (AgentChoice::Neither, _) => Preference::Neither,
        (AgentChoice::Agent1, AgentSlot::Agent1) | (AgentChoice::Agent2, AgentSlot::Agent2) => Preference::Positive,
        _ => Preference::Negative,
    }
}

/// Any non-blank reply is a valid open-ended answer.
pub fn parse_free_text(raw: &str) -> ParsedOutcome {
    if raw.trim().is_empty() {
        ParsedOutcome::invalid(OutcomeKind::FreeText)
    } else {
        ParsedOutcome::valid(Payload::FreeText { text: raw.to_string() })
    }
}

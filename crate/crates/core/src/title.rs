//! Movie title normalization and matching.
//!
//! Every dataset spells titles differently ("Matrix, The (1999)" in
//! MovieLens, "The Matrix (1999)" in ReDial, free text from a model), so all
//! comparisons happen on a [`CanonicalKey`]. The rule set, applied in order:
//!
//! 1. lowercase, then compatibility-decompose and drop combining marks
//!    (so "Amélie" and "Amelie" agree);
//! 2. a trailing inverted article (", the" / ", a" / ", an") is dropped;
//! 3. `&` becomes "and", apostrophes are deleted, every other
//!    non-alphanumeric character becomes a space;
//! 4. whitespace is collapsed;
//! 5. leading articles ("the", "a", "an") are dropped for as long as
//!    something remains after them;
//! 6. the year is appended as ` (yyyy)`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Latest release year admitted into any catalog.
pub const MAX_YEAR: i32 = 2021;

const ARTICLES: [&str; 3] = ["the", "a", "an"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TitleError {
    #[error("title {0:?} is empty after normalization")]
    Empty(String),
}

/// Normalized, lowercase identity of a movie: `"<title words> (<year>)"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalKey(String);

impl CanonicalKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Wraps a string that is already a canonical key (e.g. read back from
    /// a case file). No normalization is applied.
    pub fn from_raw(key: impl Into<String>) -> Self {
        CanonicalKey(key.into())
    }

    /// Year component, when the key carries one.
    pub fn year(&self) -> Option<i32> {
        split_title_year(&self.0).map(|(_, y)| y)
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Builds the canonical key for `(title, year)`.
pub fn normalize_title(title: &str, year: i32) -> Result<CanonicalKey, TitleError> {
    let text = normalize_title_text(title)?;
    Ok(CanonicalKey(alloc::format!("{text} ({year})")))
}

/// Title part of the canonical key, without the year. Idempotent.
pub fn normalize_title_text(title: &str) -> Result<String, TitleError> {
    let folded: String = title
        .chars()
        .flat_map(char::to_lowercase)
        .collect::<String>()
        .nfkd()
        .filter(|c| !is_combining_mark(*c))
        .collect();

    let trimmed = strip_inverted_article(folded.trim());

    let mut spaced = String::with_capacity(trimmed.len());
    for c in trimmed.chars() {
        match c {
            '&' => spaced.push_str(" and "),
            '\'' | '\u{2019}' | '\u{2018}' | '`' => {}
            c if c.is_alphanumeric() => spaced.push(c),
            _ => spaced.push(' '),
        }
    }

    let mut words: Vec<&str> = spaced.split_whitespace().collect();
    let mut start = 0;
    while words.len() - start > 1 && ARTICLES.contains(&words[start]) {
        start += 1;
    }
    words.drain(..start);
    if words.is_empty() {
        return Err(TitleError::Empty(title.to_string()));
    }
    Ok(words.join(" "))
}

fn strip_inverted_article(s: &str) -> &str {
    for art in ARTICLES {
        if let Some(head) = s.strip_suffix(art) {
            let head = head.trim_end();
            if let Some(head) = head.strip_suffix(',') {
                if !head.trim().is_empty() {
                    return head.trim_end();
                }
            }
        }
    }
    s
}

/// Splits `"Title (yyyy)"` into its parts. The year must be the last
/// parenthesized group and exactly four digits.
pub fn split_title_year(s: &str) -> Option<(&str, i32)> {
    let s = s.trim();
    let inner = s.strip_suffix(')')?;
    let open = inner.rfind('(')?;
    let digits = inner[open + 1..].trim();
    if digits.len() != 4 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let year = digits.parse().ok()?;
    let title = inner[..open].trim();
    if title.is_empty() {
        return None;
    }
    Some((title, year))
}

/// Reorders a MovieLens-style inverted title ("Matrix, The") into reading
/// order ("The Matrix"). Other titles are returned unchanged.
pub fn display_title(title: &str) -> String {
    let t = title.trim();
    for art in ["The", "A", "An"] {
        let suffix = alloc::format!(", {art}");
        if let Some(head) = t.strip_suffix(suffix.as_str()) {
            if !head.is_empty() {
                return alloc::format!("{art} {head}");
            }
        }
    }
    t.to_string()
}

/// Levenshtein distance over Unicode scalar values.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = alloc::vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance divided by the longer length; 0 for two empty strings.
pub fn normalized_edit_distance(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 0.0;
    }
    edit_distance(a, b) as f64 / longest as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bellboy_example() {
        let key = normalize_title("The Bellboy", 1960).unwrap();
        assert_eq!(key.as_str(), "bellboy (1960)");
        assert_eq!(key.year(), Some(1960));
    }

    #[test]
    fn deterministic_and_idempotent() {
        let a = normalize_title("Memento", 2000).unwrap();
        let b = normalize_title("Memento", 2000).unwrap();
        assert_eq!(a, b);
        let text = normalize_title_text("Memento").unwrap();
        assert_eq!(normalize_title_text(&text).unwrap(), text);
    }

    #[test]
    fn inverted_articles_and_diacritics() {
        assert_eq!(
            normalize_title("Matrix, The", 1999).unwrap(),
            normalize_title("The Matrix", 1999).unwrap()
        );
        assert_eq!(normalize_title_text("Amélie").unwrap(), "amelie");
        assert_eq!(normalize_title_text("Schindler's List").unwrap(), "schindlers list");
        assert_eq!(normalize_title_text("Fast & Furious").unwrap(), "fast and furious");
        assert_eq!(normalize_title_text("The The").unwrap(), "the");
        assert_eq!(normalize_title_text("A Quiet Place").unwrap(), "quiet place");
    }

    #[test]
    fn empty_titles_rejected() {
        assert!(matches!(normalize_title("  ", 2000), Err(TitleError::Empty(_))));
        assert!(normalize_title("?!", 2000).is_err());
    }

    #[test]
    fn split_and_display() {
        assert_eq!(split_title_year("Whiplash (2014)"), Some(("Whiplash", 2014)));
        assert_eq!(
            split_title_year(" Super Troopers (2001) "),
            Some(("Super Troopers", 2001))
        );
        assert_eq!(split_title_year("Super Troopers"), None);
        assert_eq!(split_title_year("(2001)"), None);
        assert_eq!(split_title_year("Twin Peaks (1990–)"), None);
        assert_eq!(display_title("Matrix, The"), "The Matrix");
        assert_eq!(display_title("Oldboy"), "Oldboy");
    }

    #[test]
    fn edit_distances() {
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("", "abc"), 3);
        assert_eq!(edit_distance("abc", "abc"), 0);
        assert!((normalized_edit_distance("abcd", "abce") - 0.25).abs() < 1e-12);
    }
}

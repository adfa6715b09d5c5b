//! Aspect-level sentiment pairs extracted from open-ended answers.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Positive,
    Negative,
    Neutral,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Positive, Sentiment::Negative, Sentiment::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            Sentiment::Positive => "positive",
            Sentiment::Negative => "negative",
            Sentiment::Neutral => "neutral",
        }
    }

    pub fn parse(s: &str) -> Option<Sentiment> {
        Sentiment::ALL
            .into_iter()
            .find(|x| x.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("aspect is empty after normalization")]
pub struct EmptyAspect;

/// Lowercases and collapses whitespace. With `stem`, a plain plural `s` is
/// dropped (`plots` → `plot`, but `actress` and `gas` stay).
pub fn normalize_aspect(raw: &str, stem: bool) -> String {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    if stem && out.chars().count() > 3 && out.ends_with('s') && !out.ends_with("ss") {
        out.pop();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AspectSentiment {
    pub aspect: String,
    pub sentiment: Sentiment,
    pub case_id: String,
}

impl AspectSentiment {
    pub fn new(
        aspect: &str,
        sentiment: Sentiment,
        case_id: impl Into<String>,
        stem: bool,
    ) -> Result<Self, EmptyAspect> {
        let aspect = normalize_aspect(aspect, stem);
        if aspect.is_empty() {
            return Err(EmptyAspect);
        }
        Ok(AspectSentiment {
            aspect,
            sentiment,
            case_id: case_id.into(),
        })
    }
}

/// Attaches a case id to raw `(aspect, sentiment)` pairs, dropping pairs
/// whose aspect normalizes to nothing.
pub fn label_pairs<'a>(
    pairs: impl IntoIterator<Item = (&'a str, Sentiment)>,
    case_id: &str,
    stem: bool,
) -> Vec<AspectSentiment> {
    pairs
        .into_iter()
        .filter_map(|(a, s)| AspectSentiment::new(a, s, case_id, stem).ok())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization() {
        assert_eq!(normalize_aspect("  Special\tEffects ", false), "special effects");
        assert_eq!(normalize_aspect("Plots", false), "plots");
        assert_eq!(normalize_aspect("Plots", true), "plot");
        assert_eq!(normalize_aspect("actress", true), "actress");
        assert!(AspectSentiment::new("  ", Sentiment::Neutral, "c", false).is_err());
    }

    #[test]
    fn sentiment_names() {
        assert_eq!(Sentiment::parse(" Negative"), Some(Sentiment::Negative));
        assert_eq!(Sentiment::parse("mixed"), None);
        let pairs = label_pairs([("Cast", Sentiment::Positive), ("", Sentiment::Negative)], "u1", false);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].aspect, "cast");
    }
}

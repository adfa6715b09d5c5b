//! Prompt templates with `{placeholder}` slots.
//!
//! The built-in texts live in `templates/*.txt` next to this crate, one file
//! per template, so they can be read and diffed without touching code.
//! Placeholders:
//!
//! | placeholder    | meaning                                               |
//! |----------------|-------------------------------------------------------|
//! | `prefix`       | `Mr.` or `Ms.`                                        |
//! | `surname`      | pooled census surname                                 |
//! | `pickiness`    | `not picky`, `moderately picky`, `extremely picky`    |
//! | `target_num`   | number of movies the simulator should name            |
//! | `history`      | IMDB lines `Title (yyyy): review title`               |
//! | `movies`       | movie list (`A and B` for ReDial, `A, B` for requests)|
//! | `time`         | `YYYY-MM-DD HH:MM:SS` (UTC)                           |
//! | `movie`        | one `Title (yyyy)`                                    |
//! | `review_len`   | character budget for an open-ended answer             |
//! | `target_len`   | approximate request length in characters              |
//! | `request`      | a Reddit request                                      |
//! | `response`     | a recommendation shown for accept/reject              |
//! | `response1/2`  | recommendations shown as AGENT 1 / AGENT 2            |

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template {template}: no value for placeholder {{{field}}}")]
    MissingField { template: &'static str, field: String },
    #[error("template {template}: unterminated placeholder at byte {at}")]
    Unterminated { template: &'static str, at: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    T1Di,
    T1IhImdb,
    T1IhReddit,
    T1IhRedial,
    T2Di,
    T2DiPp,
    T3Di,
    T3DiPp,
    T4Vanilla,
    T5AcceptReject,
    T5Compare,
    T5ReasonSuffix,
}

impl TemplateId {
    pub const ALL: [TemplateId; 12] = [
        TemplateId::T1Di,
        TemplateId::T1IhImdb,
        TemplateId::T1IhReddit,
        TemplateId::T1IhRedial,
        TemplateId::T2Di,
        TemplateId::T2DiPp,
        TemplateId::T3Di,
        TemplateId::T3DiPp,
        TemplateId::T4Vanilla,
        TemplateId::T5AcceptReject,
        TemplateId::T5Compare,
        TemplateId::T5ReasonSuffix,
    ];

    /// File stem inside a template directory (`<stem>.txt`).
    pub fn stem(self) -> &'static str {
        match self {
            TemplateId::T1Di => "t1_di",
            TemplateId::T1IhImdb => "t1_ih_imdb",
            TemplateId::T1IhReddit => "t1_ih_reddit",
            TemplateId::T1IhRedial => "t1_ih_redial",
            TemplateId::T2Di => "t2_di",
            TemplateId::T2DiPp => "t2_di_pp",
            TemplateId::T3Di => "t3_di",
            TemplateId::T3DiPp => "t3_di_pp",
            TemplateId::T4Vanilla => "t4_vanilla",
            TemplateId::T5AcceptReject => "t5_accept_reject",
            TemplateId::T5Compare => "t5_compare",
            TemplateId::T5ReasonSuffix => "t5_reason_suffix",
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            TemplateId::T1Di => include_str!("../templates/t1_di.txt"),
            TemplateId::T1IhImdb => include_str!("../templates/t1_ih_imdb.txt"),
            TemplateId::T1IhReddit => include_str!("../templates/t1_ih_reddit.txt"),
            TemplateId::T1IhRedial => include_str!("../templates/t1_ih_redial.txt"),
            TemplateId::T2Di => include_str!("../templates/t2_di.txt"),
            TemplateId::T2DiPp => include_str!("../templates/t2_di_pp.txt"),
            TemplateId::T3Di => include_str!("../templates/t3_di.txt"),
            TemplateId::T3DiPp => include_str!("../templates/t3_di_pp.txt"),
            TemplateId::T4Vanilla => include_str!("../templates/t4_vanilla.txt"),
            TemplateId::T5AcceptReject => include_str!("../templates/t5_accept_reject.txt"),
            TemplateId::T5Compare => include_str!("../templates/t5_compare.txt"),
            TemplateId::T5ReasonSuffix => include_str!("../templates/t5_reason_suffix.txt"),
        }
    }
}

/// Terms no template may contain: simulators must not learn what they are
/// being measured on.
pub const METRIC_DENY_LIST: [&str; 11] = [
    "entropy",
    "diversity",
    "diverse",
    "correlation",
    "pearson",
    "type-token",
    "positive rate",
    "metric",
    "evaluat",
    "coherence",
    "benchmark",
];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    id: TemplateId,
    source: String,
    segments: Vec<Segment>,
}

impl Template {
    /// Parses template text. One trailing newline is dropped so files
    /// saved by editors render the same as the built-ins.
    pub fn parse(id: TemplateId, text: &str) -> Result<Self, TemplateError> {
        let text = text.strip_suffix('\n').unwrap_or(text);
        let text = text.strip_suffix('\r').unwrap_or(text);
        let mut segments = Vec::new();
        let mut rest = text;
        let mut offset = 0;
        while let Some(open) = rest.find('{') {
            if open > 0 {
                segments.push(Segment::Text(rest[..open].to_string()));
            }
            let close = rest[open..].find('}').ok_or(TemplateError::Unterminated {
                template: id.stem(),
                at: offset + open,
            })?;
            segments.push(Segment::Slot(rest[open + 1..open + close].to_string()));
            offset += open + close + 1;
            rest = &rest[open + close + 1..];
        }
        if !rest.is_empty() {
            segments.push(Segment::Text(rest.to_string()));
        }
        Ok(Template {
            id,
            source: text.to_string(),
            segments,
        })
    }

    pub fn id(&self) -> TemplateId {
        self.id
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn placeholders(&self) -> BTreeSet<&str> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Slot(name) => Some(name.as_str()),
                Segment::Text(_) => None,
            })
            .collect()
    }

    /// Fills every placeholder. Values are inserted verbatim and never
    /// re-scanned for placeholders.
    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.source.len() + 64);
        for seg in &self.segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot(name) => {
                    let v = values.get(name.as_str()).ok_or_else(|| TemplateError::MissingField {
                        template: self.id.stem(),
                        field: name.clone(),
                    })?;
                    out.push_str(v);
                }
            }
        }
        Ok(out)
    }
}

/// One template per [`TemplateId`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<TemplateId, Template>,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let templates = TemplateId::ALL
            .into_iter()
            .map(|id| (id, Template::parse(id, id.builtin()).expect("built-in templates parse")))
            .collect();
        TemplateSet { templates }
    }

    /// Replaces one template, e.g. with a file from a template directory.
    pub fn with_override(mut self, id: TemplateId, text: &str) -> Result<Self, TemplateError> {
        self.templates.insert(id, Template::parse(id, text)?);
        Ok(self)
    }

    pub fn get(&self, id: TemplateId) -> &Template {
        &self.templates[&id]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Template> {
        self.templates.values()
    }

    /// Deny-listed terms found in any template, as `(stem, term)` pairs.
    pub fn metric_leaks(&self) -> Vec<(&'static str, &'static str)> {
        let mut leaks = Vec::new();
        for t in self.iter() {
            let lower = t.source.to_lowercase();
            for term in METRIC_DENY_LIST {
                if lower.contains(term) {
                    leaks.push((t.id.stem(), term));
                }
            }
        }
        leaks
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(pairs: &[(&'static str, &str)]) -> BTreeMap<&'static str, String> {
        pairs.iter().map(|(k, v)| (*k, v.to_string())).collect()
    }

    #[test]
    fn builtins_parse_and_are_zero_shot() {
        let set = TemplateSet::builtin();
        assert_eq!(set.iter().count(), 12);
        assert!(set.metric_leaks().is_empty(), "{:?}", set.metric_leaks());
        assert_eq!(
            set.get(TemplateId::T2DiPp)
                .placeholders()
                .into_iter()
                .collect::<Vec<_>>(),
            ["movie", "pickiness", "prefix", "surname"]
        );
    }

    #[test]
    fn deny_list_catches_leaks() {
        let set = TemplateSet::builtin()
            .with_override(TemplateId::T4Vanilla, "Write a diverse request for {movies}.")
            .unwrap();
        assert_eq!(set.metric_leaks(), [("t4_vanilla", "diverse")]);
    }

    #[test]
    fn missing_and_unterminated() {
        let t = Template::parse(TemplateId::T2Di, "Hi {prefix} {surname}").unwrap();
        let err = t.render(&values(&[("prefix", "Mr.")])).unwrap_err();
        assert_eq!(
            err,
            TemplateError::MissingField {
                template: "t2_di",
                field: "surname".into()
            }
        );
        assert!(Template::parse(TemplateId::T2Di, "Hi {prefix").is_err());
    }

    #[test]
    fn values_are_not_rescanned() {
        let t = Template::parse(TemplateId::T4Vanilla, "{movies}|{target_len}\n").unwrap();
        let out = t
            .render(&values(&[("movies", "{target_len}"), ("target_len", "5")]))
            .unwrap();
        assert_eq!(out, "{target_len}|5");
    }
}

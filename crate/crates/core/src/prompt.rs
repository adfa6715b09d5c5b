//! Rendering task prompts from dataset entries and personas.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::catalog::Item;
use crate::persona::{AgentAssignment, PersonaSpec};
use crate::protocol::{Baseline, Task};
use crate::seed::format_utc;
use crate::source::{Dataset, SourceCase};
use crate::template::{TemplateError, TemplateId, TemplateSet};
use crate::title::CanonicalKey;

/// Reviewed movies shown to the IMDB history simulator.
pub const IMDB_HISTORY: usize = 10;
/// Timestamped movies shown to the Reddit history simulator.
pub const REDDIT_HISTORY: usize = 1;
/// Seeker mentions shown to the ReDial history simulator.
pub const REDIAL_HISTORY: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("{case}: required field {field} is missing")]
    MissingField { case: String, field: &'static str },
    #[error("{case}: nothing left to mention after the history")]
    NoTarget { case: String },
    #[error("{case}: history needs {need} items, entry has {have}")]
    HistoryTooShort { case: String, need: usize, have: usize },
    #[error("{task} does not run with baseline {baseline}")]
    Unsupported { task: Task, baseline: Baseline },
    #[error("baseline {0} needs a persona")]
    MissingPersona(Baseline),
}

impl PromptError {
    /// Errors that mean "skip this case and count it" rather than "abort".
    pub fn is_skip(&self) -> bool {
        matches!(
            self,
            PromptError::NoTarget { .. } | PromptError::HistoryTooShort { .. } | PromptError::MissingField { .. }
        )
    }
}

/// What a single prompt is built from.
#[derive(Debug, Clone, Copy)]
pub enum PromptSource<'a> {
    ItemsTalk(&'a SourceCase),
    BinPref {
        source_ref: &'a str,
        movie: &'a str,
    },
    OpenPref {
        source_ref: &'a str,
        movie: &'a str,
        review_len: usize,
    },
    RecRequest(&'a SourceCase),
    AcceptReject {
        source_ref: &'a str,
        request: &'a str,
        response: &'a str,
        with_reason: bool,
    },
    Compare {
        source_ref: &'a str,
        request: &'a str,
        assignment: &'a AgentAssignment,
        with_reason: bool,
    },
}

impl PromptSource<'_> {
    pub fn task(&self) -> Task {
        match self {
            PromptSource::ItemsTalk(_) => Task::T1,
            PromptSource::BinPref { .. } => Task::T2,
            PromptSource::OpenPref { .. } => Task::T3,
            PromptSource::RecRequest(_) => Task::T4,
            PromptSource::AcceptReject { .. } | PromptSource::Compare { .. } => Task::T5,
        }
    }

    pub fn source_ref(&self) -> &str {
        match self {
            PromptSource::ItemsTalk(c) | PromptSource::RecRequest(c) => &c.id,
            PromptSource::BinPref { source_ref, .. }
            | PromptSource::OpenPref { source_ref, .. }
            | PromptSource::AcceptReject { source_ref, .. }
            | PromptSource::Compare { source_ref, .. } => source_ref,
        }
    }
}

/// One task instance, ready to send.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptCase {
    pub id: String,
    pub task: Task,
    pub baseline: Baseline,
    pub template: TemplateId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona: Option<PersonaSpec>,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_num: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_len: Option<usize>,
    /// Items the prompt itself names; removed before counting T1 mentions.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prompt_items: Vec<CanonicalKey>,
    pub prompt_text: String,
    pub rng_seed: u64,
}

/// `A`, `A and B`, `A, B and C`.
pub fn join_and(titles: &[String]) -> String {
    match titles {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => alloc::format!("{} and {last}", init.join(", ")),
    }
}

fn persona_values(
    baseline: Baseline,
    persona: Option<&PersonaSpec>,
    values: &mut BTreeMap<&'static str, String>,
) -> Result<(), PromptError> {
    if !baseline.uses_persona() {
        return Ok(());
    }
    let p = persona.ok_or(PromptError::MissingPersona(baseline))?;
    values.insert("prefix", p.title.as_prefix().to_string());
    values.insert("surname", p.surname.clone());
    if baseline == Baseline::DiPp {
        let level = p.pickiness.ok_or(PromptError::MissingPersona(baseline))?;
        values.insert("pickiness", level.phrase().to_string());
    }
    Ok(())
}

/// Template, shown items and extra template values of a history prompt.
type History = (TemplateId, Vec<Item>, BTreeMap<&'static str, String>);

/// Items shown as interaction history for a T1 entry, with the number of
/// distinct items they account for.
fn t1_history(case: &SourceCase) -> Result<History, PromptError> {
    let mut values = BTreeMap::new();
    let short = |need: usize, have: usize| PromptError::HistoryTooShort {
        case: case.id.clone(),
        need,
        have,
    };
    match case.dataset {
        Dataset::Imdb => {
            let mut seen = BTreeSet::new();
            let mut lines = Vec::new();
            let mut items = Vec::new();
            for r in case.reviews() {
                if items.len() == IMDB_HISTORY {
                    break;
                }
                if seen.insert(r.item.key.clone()) {
                    lines.push(alloc::format!("{}: {}", r.item.display(), r.review_title));
                    items.push(r.item.clone());
                }
            }
            if items.len() < IMDB_HISTORY {
                return Err(short(IMDB_HISTORY, items.len()));
            }
            values.insert("history", lines.join("\n"));
            Ok((TemplateId::T1IhImdb, items, values))
        }
        Dataset::Reddit => {
            let utc = case.timestamp().ok_or(PromptError::MissingField {
                case: case.id.clone(),
                field: "timestamp",
            })?;
            let items: Vec<Item> = case.mentioned_items.iter().take(REDDIT_HISTORY).cloned().collect();
            if items.len() < REDDIT_HISTORY {
                return Err(short(REDDIT_HISTORY, items.len()));
            }
            values.insert("time", format_utc(utc));
            values.insert("movies", join_and(&items.iter().map(Item::display).collect::<Vec<_>>()));
            Ok((TemplateId::T1IhReddit, items, values))
        }
        Dataset::Redial => {
            let items: Vec<Item> = case.mentioned_items.iter().take(REDIAL_HISTORY).cloned().collect();
            if items.len() < REDIAL_HISTORY {
                return Err(short(REDIAL_HISTORY, items.len()));
            }
            values.insert("movies", join_and(&items.iter().map(Item::display).collect::<Vec<_>>()));
            Ok((TemplateId::T1IhRedial, items, values))
        }
        Dataset::Movielens => Err(PromptError::MissingField {
            case: case.id.clone(),
            field: "mentioned_items",
        }),
    }
}

/// Renders one prompt. Pure: the same arguments always produce the same
/// `prompt_text`.
pub fn render_prompt(
    templates: &TemplateSet,
    id: impl Into<String>,
    baseline: Baseline,
    source: &PromptSource<'_>,
    persona: Option<&PersonaSpec>,
    rng_seed: u64,
) -> Result<PromptCase, PromptError> {
    let task = source.task();
    if !task.baselines().contains(&baseline) {
        return Err(PromptError::Unsupported { task, baseline });
    }
    let mut values: BTreeMap<&'static str, String> = BTreeMap::new();
    persona_values(baseline, persona, &mut values)?;
    let mut target_num = None;
    let mut target_len = None;
    let mut prompt_items = Vec::new();
    let mut suffix = false;

    let template = match *source {
        PromptSource::ItemsTalk(case) => {
            let (template, history) = match baseline {
                Baseline::Ih => {
                    let (t, items, extra) = t1_history(case)?;
                    values.extend(extra);
                    (t, items)
                }
                _ => (TemplateId::T1Di, Vec::new()),
            };
            let n = case.mentioned_items.len().saturating_sub(history.len());
            if n < 1 {
                return Err(PromptError::NoTarget { case: case.id.clone() });
            }
            target_num = Some(n);
            values.insert("target_num", n.to_string());
            prompt_items = history.into_iter().map(|i| i.key).collect();
            template
        }
        PromptSource::BinPref { movie, .. } => {
            values.insert("movie", movie.to_string());
            if baseline == Baseline::DiPp {
                TemplateId::T2DiPp
            } else {
                TemplateId::T2Di
            }
        }
        PromptSource::OpenPref { movie, review_len, .. } => {
            values.insert("movie", movie.to_string());
            values.insert("review_len", review_len.to_string());
            target_len = Some(review_len);
            if baseline == Baseline::DiPp {
                TemplateId::T3DiPp
            } else {
                TemplateId::T3Di
            }
        }
        PromptSource::RecRequest(case) => {
            let missing = |field| PromptError::MissingField {
                case: case.id.clone(),
                field,
            };
            if case.request_items.is_empty() {
                return Err(missing("request_items"));
            }
            let len = case.request_length.ok_or_else(|| missing("request_length"))?;
            let titles: Vec<String> = case.request_items.iter().map(Item::display).collect();
            values.insert("movies", titles.join(", "));
            values.insert("target_len", len.to_string());
            target_len = Some(len);
            prompt_items = case.request_items.iter().map(|i| i.key.clone()).collect();
            TemplateId::T4Vanilla
        }
        PromptSource::AcceptReject {
            request,
            response,
            with_reason,
            ..
        } => {
            values.insert("request", request.to_string());
            values.insert("response", response.to_string());
            suffix = with_reason;
            TemplateId::T5AcceptReject
        }
        PromptSource::Compare {
            request,
            assignment,
            with_reason,
            ..
        } => {
            values.insert("request", request.to_string());
            values.insert("response1", assignment.agent1.clone());
            values.insert("response2", assignment.agent2.clone());
            suffix = with_reason;
            TemplateId::T5Compare
        }
    };

    let mut prompt_text = templates.get(template).render(&values)?;
    if suffix {
        prompt_text.push('\n');
        prompt_text.push_str(templates.get(TemplateId::T5ReasonSuffix).source());
    }
    Ok(PromptCase {
        id: id.into(),
        task,
        baseline,
        template,
        persona: if baseline.uses_persona() {
            persona.cloned()
        } else {
            None
        },
        source: source.source_ref().to_string(),
        target_num,
        target_len,
        prompt_items,
        prompt_text,
        rng_seed,
    })
}

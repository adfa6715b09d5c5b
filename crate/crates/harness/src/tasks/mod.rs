//! The five task pipelines: cases, prompts, backend, parsing, metrics.

mod aspects;
mod feedback;
mod items;
mod preference;
mod requests;

use std::collections::BTreeMap;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use usersim_core::metrics::Stat;
use usersim_core::parse::Payload;
use usersim_core::persona::{sample_persona, PersonaSpec, SurnamePool};
use usersim_core::prompt::{render_prompt, PromptCase, PromptError, PromptSource};
use usersim_core::seed::{case_rng, derive_seed};
use usersim_core::template::TemplateSet;
use usersim_core::{Baseline, Task};

pub use aspects::{run_t3, sample_review, AspectMetrics};
pub use feedback::{recommendation_text, run_t5, AcceptRejectCells, CompareCells, FeedbackMetrics, FeedbackVariant};
pub use items::{run_t1, ItemMetrics};
pub use preference::{movie_groups, pearson_p_value, run_t2, MovieRate, PreferenceMetrics};
pub use requests::{run_t4, BinSummary, RequestMetrics};

use crate::config::RunConfig;
use crate::gateway::{BackendInfo, CallResult, CompletionRequest, Gateway, ReplyLogEntry};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Everything a task needs besides its data.
pub struct TaskContext<'a> {
    pub gateway: &'a Gateway,
    pub templates: &'a TemplateSet,
    pub surnames: &'a SurnamePool,
    pub run: &'a RunConfig,
    pub seed: u64,
}

impl TaskContext<'_> {
    /// Persona for one prompt, drawn from that prompt's own stream.
    fn persona(&self, baseline: Baseline, prompt_id: &str) -> Option<PersonaSpec> {
        baseline
            .uses_persona()
            .then(|| sample_persona(baseline, self.surnames, &mut case_rng(self.seed, prompt_id)))
    }

    /// Renders one prompt; skippable problems are tallied in `skipped`.
    fn render(
        &self,
        id: String,
        baseline: Baseline,
        source: &PromptSource<'_>,
        skipped: &mut BTreeMap<String, u64>,
    ) -> Result<Option<PromptCase>> {
        let persona = self.persona(baseline, &id);
        let seed = derive_seed(self.seed, &id);
        match render_prompt(self.templates, id, baseline, source, persona.as_ref(), seed) {
            Ok(p) => Ok(Some(p)),
            Err(e) if e.is_skip() => {
                let reason = match e {
                    PromptError::NoTarget { .. } => "no_target".to_string(),
                    PromptError::HistoryTooShort { .. } => "history_too_short".to_string(),
                    PromptError::MissingField { field, .. } => format!("missing_{field}"),
                    _ => "other".to_string(),
                };
                log::debug!("skipping case: {e}");
                *skipped.entry(reason).or_insert(0) += 1;
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Sends every prompt; the nonce is the prompt's own seed.
    fn execute(&self, task: Task, prompts: &[PromptCase]) -> Result<(Vec<CallResult>, Vec<ReplyLogEntry>)> {
        let requests: Vec<CompletionRequest> = prompts
            .iter()
            .map(|p| CompletionRequest::new(p.id.clone(), p.prompt_text.clone(), p.rng_seed))
            .collect();
        log::info!("{task}: sending {} prompts", requests.len());
        let results = self
            .gateway
            .complete_all(&requests)
            .map_err(|e| anyhow::anyhow!("{task}: backend error, run stopped: {e}"))?;
        let model = &self.gateway.info().model;
        let log = requests
            .iter()
            .zip(&results)
            .map(|(r, res)| ReplyLogEntry::new(r, model, res))
            .collect();
        let failures = results.iter().filter(|r| r.is_err()).count();
        check_abort(task, failures, results.len(), self.run.abort_threshold)?;
        Ok((results, log))
    }
}

/// Refuses to publish metrics when too many cases failed.
pub fn check_abort(task: Task, failures: usize, cases: usize, threshold: f64) -> Result<()> {
    if cases > 0 && failures as f64 > threshold * cases as f64 {
        bail!("{task}: {failures} of {cases} cases failed (abort threshold {threshold}); no report written");
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseCounts {
    /// Prompts sent.
    pub cases: usize,
    pub successes: usize,
    pub failures: usize,
    /// Successful replies that did not parse.
    pub invalid: usize,
    pub invalid_rate: Stat,
    /// Dataset entries that produced no prompt, by reason.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub skipped: BTreeMap<String, u64>,
}

impl CaseCounts {
    fn tally(records: &[CaseRecord], skipped: BTreeMap<String, u64>) -> Self {
        let failures = records.iter().filter(|r| r.status == CaseStatus::Failed).count();
        let invalid = records.iter().filter(|r| r.status == CaseStatus::Invalid).count();
        let successes = records.len() - failures;
        CaseCounts {
            cases: records.len(),
            successes,
            failures,
            invalid,
            invalid_rate: Stat::ratio(invalid as u64, successes as u64),
            skipped,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStatus {
    Ok,
    Invalid,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub id: String,
    pub source: String,
    pub status: CaseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Payload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub detail: BTreeMap<String, serde_json::Value>,
}

impl CaseRecord {
    fn new(prompt: &PromptCase, result: &CallResult, outcome: Option<Payload>) -> Self {
        let (status, error) = match result {
            Err(f) => (CaseStatus::Failed, Some(f.error.clone())),
            Ok(_) if outcome.is_none() => (CaseStatus::Invalid, None),
            Ok(_) => (CaseStatus::Ok, None),
        };
        CaseRecord {
            id: prompt.id.clone(),
            source: prompt.source.clone(),
            status,
            outcome,
            error,
            detail: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.detail.insert(
            key.to_string(),
            serde_json::to_value(value).expect("detail values serialize"),
        );
        self
    }
}

/// Task-specific metrics, computed the same way for simulator and human.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metrics {
    Items(ItemMetrics),
    Preference(PreferenceMetrics),
    Aspects(AspectMetrics),
    Requests(RequestMetrics),
    Feedback(FeedbackMetrics),
}

impl Metrics {
    /// Every scalar metric with a stable name.
    pub fn scalars(&self) -> Vec<(String, Stat)> {
        match self {
            Metrics::Items(m) => m.scalars(),
            Metrics::Preference(m) => m.scalars(),
            Metrics::Aspects(m) => m.scalars(),
            Metrics::Requests(m) => m.scalars(),
            Metrics::Feedback(m) => m.scalars(),
        }
    }
}

pub(crate) fn count(n: usize) -> Stat {
    Stat::Value(n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: String,
    pub simulator: Stat,
    pub human: Stat,
    /// Simulator minus human; undefined unless both sides are defined.
    pub difference: Stat,
}

pub fn compare(simulator: &Metrics, human: &Metrics) -> Vec<Comparison> {
    let human: BTreeMap<String, Stat> = human.scalars().into_iter().collect();
    simulator
        .scalars()
        .into_iter()
        .filter_map(|(metric, s)| {
            let h = *human.get(&metric)?;
            let difference = match (s, h) {
                (Stat::Value(a), Stat::Value(b)) => Stat::Value(a - b),
                _ => Stat::Undefined,
            };
            Some(Comparison {
                metric,
                simulator: s,
                human: h,
                difference,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub schema_version: u32,
    pub task: Task,
    pub baseline: Baseline,
    /// Dataset, movie group, or `reddit`.
    pub scope: String,
    pub backend: BackendInfo,
    pub seed: u64,
    pub counts: CaseCounts,
    pub metrics: Metrics,
    pub human: Metrics,
    pub comparison: Vec<Comparison>,
    pub records: Vec<CaseRecord>,
}

impl TaskReport {
    #[allow(clippy::too_many_arguments)]
    fn new(
        ctx: &TaskContext<'_>,
        task: Task,
        baseline: Baseline,
        scope: impl Into<String>,
        records: Vec<CaseRecord>,
        skipped: BTreeMap<String, u64>,
        metrics: Metrics,
        human: Metrics,
    ) -> Self {
        TaskReport {
            schema_version: REPORT_SCHEMA_VERSION,
            task,
            baseline,
            scope: scope.into(),
            backend: ctx.gateway.info().clone(),
            seed: ctx.seed,
            counts: CaseCounts::tally(&records, skipped),
            comparison: compare(&metrics, &human),
            metrics,
            human,
            records,
        }
    }

    /// `<task>_<baseline>_<scope>`, safe as a file stem.
    pub fn stem(&self) -> String {
        let scope: String = self
            .scope
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
            .collect();
        format!("{}_{}_{}", self.task.id(), self.baseline.id(), scope)
    }

    /// Largest absolute simulator-minus-human difference, ignoring metrics
    /// that are undefined on both sides. `None` when one side is undefined
    /// and the other is not.
    pub fn max_abs_difference(&self) -> Option<f64> {
        let mut worst = 0.0f64;
        for c in &self.comparison {
            match (c.simulator, c.human, c.difference) {
                (Stat::Undefined, Stat::Undefined, _) => {}
                (_, _, Stat::Value(d)) => worst = worst.max(d.abs()),
                _ => return None,
            }
        }
        Some(worst)
    }
}

/// A task's report plus what it sent and received.
#[derive(Debug, Clone)]
pub struct TaskOutput {
    pub report: TaskReport,
    pub prompts: Vec<PromptCase>,
    pub replies: Vec<ReplyLogEntry>,
}

fn check_baseline(task: Task, baseline: Baseline) -> Result<()> {
    if !task.baselines().contains(&baseline) {
        bail!(
            "{task} runs with {}, not {baseline}",
            task.baselines().iter().map(|b| b.id()).collect::<Vec<_>>().join(" or ")
        );
    }
    Ok(())
}

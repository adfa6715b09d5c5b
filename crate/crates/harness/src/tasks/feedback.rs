use std::collections::BTreeMap;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use usersim_core::metrics::{
    coherence_stats, CoherenceReport, FeedbackMode, FeedbackOutcome, FeedbackRecord, MetricError, Polarity, Stat,
    VariantStats,
};
use usersim_core::parse::{debias, parse_accept_reject, parse_agent_choice, Feedback, Preference};
use usersim_core::persona::{assign_agents, sample_negative_index, AgentAssignment};
use usersim_core::prompt::{PromptCase, PromptSource};
use usersim_core::seed::case_rng;
use usersim_core::source::{Comment, SourceCase};
use usersim_core::{Baseline, Item, Task};

use super::{CaseRecord, Metrics, TaskContext, TaskOutput, TaskReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptRejectCells {
    pub positive_accept: u64,
    pub positive_reject: u64,
    pub negative_accept: u64,
    pub negative_reject: u64,
    pub invalid: u64,
    /// Accepting a positive recommendation.
    pub coherent_positive: Stat,
    /// Rejecting a positive recommendation.
    pub likely_incoherent: Stat,
    /// Accepting a negative recommendation.
    pub incoherent: Stat,
    /// Rejecting a negative recommendation.
    pub coherent_negative: Stat,
    pub overall_coherent: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareCells {
    pub prefer_positive: u64,
    pub prefer_negative: u64,
    pub neither: u64,
    pub invalid: u64,
    /// Positive preferred among replies choosing an agent.
    pub coherent: Stat,
    pub neither_rate: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackVariant {
    /// Whether recommendations carried their full comment text.
    pub explanations: bool,
    pub accept_reject: AcceptRejectCells,
    pub compare: CompareCells,
}

impl FeedbackVariant {
    fn new(explanations: bool, v: &VariantStats) -> Self {
        let ar = &v.accept_reject;
        let c = &v.compare;
        FeedbackVariant {
            explanations,
            accept_reject: AcceptRejectCells {
                positive_accept: ar.positive.accept,
                positive_reject: ar.positive.reject,
                negative_accept: ar.negative.accept,
                negative_reject: ar.negative.reject,
                invalid: ar.invalid,
                coherent_positive: ar.coherent(Polarity::Positive),
                likely_incoherent: ar.incoherent(Polarity::Positive),
                incoherent: ar.incoherent(Polarity::Negative),
                coherent_negative: ar.coherent(Polarity::Negative),
                overall_coherent: ar.overall_coherent(),
            },
            compare: CompareCells {
                prefer_positive: c.prefer_positive,
                prefer_negative: c.prefer_negative,
                neither: c.neither,
                invalid: c.invalid,
                coherent: c.coherent(),
                neither_rate: c.neither_rate(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackMetrics {
    pub variants: Vec<FeedbackVariant>,
}

impl FeedbackMetrics {
    pub fn from_records(records: &[FeedbackRecord], variants: &[bool]) -> Result<Self> {
        let report = match coherence_stats(records) {
            Ok(r) => r,
            Err(MetricError::NoClassifiableRecords) => CoherenceReport::default(),
            Err(e) => return Err(e.into()),
        };
        let empty = VariantStats::default();
        Ok(FeedbackMetrics {
            variants: variants
                .iter()
                .map(|&e| FeedbackVariant::new(e, report.variant(e).unwrap_or(&empty)))
                .collect(),
        })
    }

    pub fn variant(&self, explanations: bool) -> Option<&FeedbackVariant> {
        self.variants.iter().find(|v| v.explanations == explanations)
    }

    pub(super) fn scalars(&self) -> Vec<(String, Stat)> {
        let mut out = Vec::new();
        for v in &self.variants {
            let p = if v.explanations { "explained" } else { "items" };
            let ar = &v.accept_reject;
            let c = &v.compare;
            let n = |x: u64| Stat::Value(x as f64);
            out.extend([
                (format!("{p}.accept_reject.positive_accept"), n(ar.positive_accept)),
                (format!("{p}.accept_reject.positive_reject"), n(ar.positive_reject)),
                (format!("{p}.accept_reject.negative_accept"), n(ar.negative_accept)),
                (format!("{p}.accept_reject.negative_reject"), n(ar.negative_reject)),
                (format!("{p}.accept_reject.coherent_positive"), ar.coherent_positive),
                (format!("{p}.accept_reject.likely_incoherent"), ar.likely_incoherent),
                (format!("{p}.accept_reject.incoherent"), ar.incoherent),
                (format!("{p}.accept_reject.coherent_negative"), ar.coherent_negative),
                (format!("{p}.accept_reject.overall_coherent"), ar.overall_coherent),
                (format!("{p}.compare.prefer_positive"), n(c.prefer_positive)),
                (format!("{p}.compare.prefer_negative"), n(c.prefer_negative)),
                (format!("{p}.compare.neither"), n(c.neither)),
                (format!("{p}.compare.coherent"), c.coherent),
                (format!("{p}.compare.neither_rate"), c.neither_rate),
            ]);
        }
        out
    }
}

/// How a recommendation is shown: titles only, or the whole comment.
pub fn recommendation_text(comment: &Comment, explanations: bool) -> String {
    if explanations {
        comment.text.clone()
    } else {
        comment.items.iter().map(Item::display).collect::<Vec<_>>().join(", ")
    }
}

/// What one feedback prompt asks about.
#[derive(Debug, Clone)]
struct Probe {
    request: String,
    mode: FeedbackMode,
    polarity: Polarity,
    explanations: bool,
    assignment: Option<AgentAssignment>,
}

fn outcome_of(probe: &Probe, raw: &str) -> (FeedbackOutcome, Option<usersim_core::Payload>) {
    match probe.mode {
        FeedbackMode::AcceptReject => {
            let o = parse_accept_reject(raw);
            let outcome = match o.feedback() {
                Some(Feedback::Accept) => FeedbackOutcome::Accept,
                Some(Feedback::Reject) => FeedbackOutcome::Reject,
                None => FeedbackOutcome::Invalid,
            };
            (outcome, o.payload().cloned())
        }
        FeedbackMode::Compare => {
            let o = parse_agent_choice(raw);
            let slot = probe
                .assignment
                .as_ref()
                .expect("compare probes carry an assignment")
                .positive_slot;
            let outcome = match o.choice().map(|c| debias(c, slot)) {
                Some(Preference::Positive) => FeedbackOutcome::PreferPositive,
                Some(Preference::Negative) => FeedbackOutcome::PreferNegative,
                Some(Preference::Neither) => FeedbackOutcome::Neither,
                None => FeedbackOutcome::Invalid,
            };
            (outcome, o.payload().cloned())
        }
    }
}

/// The judgement a human requester implicitly gives: their own thread's
/// comment is acceptable and preferred, a stranger's is not.
fn human_outcome(probe: &Probe) -> FeedbackOutcome {
    match (probe.mode, probe.polarity) {
        (FeedbackMode::Compare, _) => FeedbackOutcome::PreferPositive,
        (_, Polarity::Positive) => FeedbackOutcome::Accept,
        (_, Polarity::Negative) => FeedbackOutcome::Reject,
    }
}

/// Feedback: for every request, accept/reject its own head comment and a
/// random other request's, and compare the two side by side. Runs the
/// titles-only variant, plus the full-comment variant with `explanations`.
pub fn run_t5(ctx: &TaskContext<'_>, cases: &[SourceCase], explanations: bool, reasons: bool) -> Result<TaskOutput> {
    let baseline = Baseline::Vanilla;
    let mut skipped = BTreeMap::new();
    let mut eligible: Vec<(&SourceCase, &str, &Comment)> = Vec::new();
    for c in cases {
        match (c.request_text.as_deref(), c.head_comment()) {
            (Some(r), Some(h)) if !r.trim().is_empty() => eligible.push((c, r, h)),
            _ => *skipped.entry("missing_request_or_comment".to_string()).or_insert(0) += 1,
        }
    }
    if eligible.len() < 2 {
        bail!(
            "t5 needs at least 2 requests with a head comment, found {}",
            eligible.len()
        );
    }
    let negatives: Vec<usize> = eligible
        .iter()
        .enumerate()
        .map(|(i, (c, ..))| {
            sample_negative_index(
                i,
                eligible.len(),
                &mut case_rng(ctx.seed, &format!("t5/negative/{}", c.id)),
            )
        })
        .collect::<Result<_, _>>()?;

    let variants: Vec<bool> = if explanations { vec![false, true] } else { vec![false] };
    let mut prompts: Vec<PromptCase> = Vec::new();
    let mut probes: Vec<Probe> = Vec::new();
    for &explained in &variants {
        let tag = if explained { "explained" } else { "items" };
        for (i, (case, request, head)) in eligible.iter().enumerate() {
            let positive = recommendation_text(head, explained);
            let negative = recommendation_text(eligible[negatives[i]].2, explained);
            for (polarity, response) in [(Polarity::Positive, &positive), (Polarity::Negative, &negative)] {
                let pol = if polarity == Polarity::Positive {
                    "positive"
                } else {
                    "negative"
                };
                let src = PromptSource::AcceptReject {
                    source_ref: &case.id,
                    request,
                    response,
                    with_reason: reasons,
                };
                let id = format!("t5/{tag}/accept_reject/{pol}/{}", case.id);
                if let Some(p) = ctx.render(id, baseline, &src, &mut skipped)? {
                    prompts.push(p);
                    probes.push(Probe {
                        request: case.id.clone(),
                        mode: FeedbackMode::AcceptReject,
                        polarity,
                        explanations: explained,
                        assignment: None,
                    });
                }
            }
            let assignment = assign_agents(
                &positive,
                &negative,
                &mut case_rng(ctx.seed, &format!("t5/slot/{tag}/{}", case.id)),
            );
            let src = PromptSource::Compare {
                source_ref: &case.id,
                request,
                assignment: &assignment,
                with_reason: reasons,
            };
            let id = format!("t5/{tag}/compare/{}", case.id);
            if let Some(p) = ctx.render(id, baseline, &src, &mut skipped)? {
                prompts.push(p);
                probes.push(Probe {
                    request: case.id.clone(),
                    mode: FeedbackMode::Compare,
                    polarity: Polarity::Positive,
                    explanations: explained,
                    assignment: Some(assignment),
                });
            }
        }
    }
    let (results, replies) = ctx.execute(Task::T5, &prompts)?;

    let mut records = Vec::with_capacity(prompts.len());
    let mut sim = Vec::new();
    let mut human = Vec::new();
    for ((p, r), probe) in prompts.iter().zip(&results).zip(&probes) {
        let feedback =
            |outcome| FeedbackRecord::new(&probe.request, probe.polarity, probe.mode, outcome, probe.explanations);
        human.push(feedback(human_outcome(probe))?);
        let (outcome, payload) = match r {
            Ok(reply) => {
                let (o, payload) = outcome_of(probe, &reply.raw_text);
                sim.push(feedback(o)?);
                (Some(o), payload)
            }
            Err(_) => (None, None),
        };
        let mut rec = CaseRecord::new(p, r, payload)
            .with("mode", probe.mode)
            .with("polarity", probe.polarity)
            .with("explanations", probe.explanations)
            .with("outcome", outcome);
        if let Some(a) = &probe.assignment {
            rec = rec.with("positive_slot", a.positive_slot);
        }
        if reasons {
            if let Ok(reply) = r {
                rec = rec.with("reply", &reply.raw_text);
            }
        }
        records.push(rec);
    }

    let report = TaskReport::new(
        ctx,
        Task::T5,
        baseline,
        "reddit",
        records,
        skipped,
        Metrics::Feedback(FeedbackMetrics::from_records(&sim, &variants)?),
        Metrics::Feedback(FeedbackMetrics::from_records(&human, &variants)?),
    );
    Ok(TaskOutput {
        report,
        prompts,
        replies,
    })
}

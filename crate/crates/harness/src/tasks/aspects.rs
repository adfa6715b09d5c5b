use std::collections::BTreeMap;

use anyhow::Result;
use rand::Rng;
use serde::{Deserialize, Serialize};
use usersim_core::aspect::Sentiment;
use usersim_core::metrics::{aspect_stats, Distribution, Stat};
use usersim_core::parse::{parse_free_text, Payload};
use usersim_core::prompt::PromptSource;
use usersim_core::seed::case_rng;
use usersim_core::source::{Review, SourceCase};
use usersim_core::{Baseline, Task};

use super::{check_baseline, count, CaseRecord, Metrics, TaskContext, TaskOutput, TaskReport};
use crate::absa::{extract_corpus, Extraction, Extractor};

/// Aspects listed in a report.
const TOP_ASPECTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectMetrics {
    pub texts: usize,
    /// Texts whose extraction failed.
    pub excluded: usize,
    pub num_pairs: usize,
    pub num_aspects: usize,
    pub aspect_entropy: Stat,
    pub sentiment_entropy: Stat,
    pub sentiments: BTreeMap<Sentiment, u64>,
    pub top_aspects: Vec<(String, u64)>,
}

impl AspectMetrics {
    fn from_extraction(ex: &Extraction) -> Self {
        let aspects: Distribution = ex.pairs.iter().map(|p| p.aspect.clone()).collect();
        let top_aspects = aspects
            .sorted_by_frequency()
            .into_iter()
            .take(TOP_ASPECTS)
            .map(|(a, n)| (a.to_string(), n))
            .collect();
        let (aspect_entropy, sentiment_entropy, sentiments) = match aspect_stats(&ex.pairs) {
            Ok(s) => (
                Stat::Value(s.aspect_entropy),
                Stat::Value(s.sentiment_entropy),
                s.sentiments,
            ),
            Err(_) => (
                Stat::Undefined,
                Stat::Undefined,
                Sentiment::ALL.into_iter().map(|s| (s, 0)).collect(),
            ),
        };
        AspectMetrics {
            texts: ex.per_text.len(),
            excluded: ex.excluded,
            num_pairs: ex.pairs.len(),
            num_aspects: aspects.num_categories(),
            aspect_entropy,
            sentiment_entropy,
            sentiments,
            top_aspects,
        }
    }

    pub(super) fn scalars(&self) -> Vec<(String, Stat)> {
        let mut out = vec![
            ("texts".into(), count(self.texts)),
            ("excluded".into(), count(self.excluded)),
            ("num_pairs".into(), count(self.num_pairs)),
            ("num_aspects".into(), count(self.num_aspects)),
            ("aspect_entropy".into(), self.aspect_entropy),
            ("sentiment_entropy".into(), self.sentiment_entropy),
        ];
        for (s, n) in &self.sentiments {
            out.push((format!("sentiment[{s}]"), Stat::Value(*n as f64)));
        }
        out
    }
}

/// The review whose movie and length seed a user's prompt. Depends only on
/// the seed and the user, so every baseline sees the same review.
pub fn sample_review(case: &SourceCase, seed: u64) -> Option<(usize, &Review)> {
    let candidates: Vec<(usize, &Review)> = case
        .reviews()
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.review_text.trim().is_empty())
        .collect();
    if candidates.is_empty() {
        return None;
    }
    let mut rng = case_rng(seed, &format!("t3/review/{}", case.id));
    Some(candidates[rng.random_range(0..candidates.len())])
}

/// Open-ended preference: personas give their thoughts on a movie a user
/// reviewed, within the review's length; aspects are extracted from both
/// sides.
pub fn run_t3(
    ctx: &TaskContext<'_>,
    cases: &[SourceCase],
    extractor: &dyn Extractor,
    stem: bool,
    baseline: Baseline,
) -> Result<TaskOutput> {
    check_baseline(Task::T3, baseline)?;
    let mut skipped = BTreeMap::new();
    let mut prompts = Vec::new();
    let mut human = Vec::new();
    let mut review_index = Vec::new();
    for case in cases {
        let Some((idx, review)) = sample_review(case, ctx.seed) else {
            *skipped.entry("no_review_text".to_string()).or_insert(0) += 1;
            continue;
        };
        let movie = review.item.display();
        let src = PromptSource::OpenPref {
            source_ref: &case.id,
            movie: &movie,
            review_len: review.review_text.chars().count(),
        };
        if let Some(p) = ctx.render(format!("t3/{baseline}/{}", case.id), baseline, &src, &mut skipped)? {
            human.push((case.id.clone(), review.review_text.clone()));
            review_index.push(idx);
            prompts.push(p);
        }
    }
    let (results, replies) = ctx.execute(Task::T3, &prompts)?;

    let mut records = Vec::with_capacity(prompts.len());
    let mut texts = Vec::new();
    let mut text_record = Vec::new();
    for (i, (p, r)) in prompts.iter().zip(&results).enumerate() {
        let outcome = r
            .as_ref()
            .ok()
            .and_then(|reply| parse_free_text(&reply.raw_text).payload().cloned());
        if let Some(Payload::FreeText { text }) = &outcome {
            texts.push((p.id.clone(), text.clone()));
            text_record.push(i);
        }
        records.push(
            CaseRecord::new(p, r, outcome)
                .with("target_len", p.target_len)
                .with("review_index", review_index[i]),
        );
    }
    let sim = extract_corpus(extractor, &texts, stem)?;
    for (&i, pairs) in text_record.iter().zip(&sim.per_text) {
        records[i].detail.insert("pairs".into(), serde_json::json!(pairs));
    }
    let human_ex = extract_corpus(extractor, &human, stem)?;

    let report = TaskReport::new(
        ctx,
        Task::T3,
        baseline,
        "imdb",
        records,
        skipped,
        Metrics::Aspects(AspectMetrics::from_extraction(&sim)),
        Metrics::Aspects(AspectMetrics::from_extraction(&human_ex)),
    );
    Ok(TaskOutput {
        report,
        prompts,
        replies,
    })
}

use std::collections::BTreeMap;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use usersim_core::catalog::ItemCatalog;
use usersim_core::metrics::{entropy, item_distribution, ItemDistribution, Stat};
use usersim_core::parse::{parse_item_list, CatalogIndex, ItemListStats, ItemMention};
use usersim_core::prompt::{PromptCase, PromptSource};
use usersim_core::source::{Dataset, SourceCase};
use usersim_core::{Baseline, Task};

use super::{check_baseline, count, CaseRecord, Metrics, TaskContext, TaskOutput, TaskReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemMetrics {
    pub entropy: Stat,
    pub distinct_items: usize,
    pub mentions: u64,
    pub unmatched: u64,
    pub removed_prompt_items: u64,
    /// Extracted titles that matched the catalog.
    pub match_rate: Stat,
    #[serde(default)]
    pub fuzzy_matches: usize,
    /// Entropy over the whole ingested dataset, for the human side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_entropy: Option<Stat>,
    /// Categories by descending count.
    pub sorted_counts: Vec<(String, u64)>,
}

impl ItemMetrics {
    fn from_distribution(d: &ItemDistribution, parse: ItemListStats) -> Self {
        ItemMetrics {
            entropy: Stat::from_option(entropy(&d.distribution).ok()),
            distinct_items: d.distribution.num_categories(),
            mentions: d.distribution.total(),
            unmatched: d.unmatched,
            removed_prompt_items: d.removed_prompt_items,
            match_rate: Stat::ratio(parse.matched as u64, parse.extracted as u64),
            fuzzy_matches: parse.fuzzy,
            dataset_entropy: None,
            sorted_counts: d
                .distribution
                .sorted_by_frequency()
                .into_iter()
                .map(|(c, n)| (c.to_string(), n))
                .collect(),
        }
    }

    pub(super) fn scalars(&self) -> Vec<(String, Stat)> {
        vec![
            ("entropy".into(), self.entropy),
            ("distinct_items".into(), count(self.distinct_items)),
            ("mentions".into(), Stat::Value(self.mentions as f64)),
            ("unmatched".into(), Stat::Value(self.unmatched as f64)),
            (
                "removed_prompt_items".into(),
                Stat::Value(self.removed_prompt_items as f64),
            ),
            ("match_rate".into(), self.match_rate),
        ]
    }
}

/// Items talk: each entry's simulator names as many movies as the human
/// did (minus any history shown), and the two mention distributions are
/// compared.
pub fn run_t1(
    ctx: &TaskContext<'_>,
    dataset: Dataset,
    cases: &[SourceCase],
    catalog: &ItemCatalog,
    dataset_entropy: Option<Stat>,
    baseline: Baseline,
) -> Result<TaskOutput> {
    check_baseline(Task::T1, baseline)?;
    let mut skipped = BTreeMap::new();
    let mut prompts: Vec<PromptCase> = Vec::new();
    let mut sources: Vec<&SourceCase> = Vec::new();
    for case in cases {
        let id = format!("t1/{baseline}/{}", case.id);
        if let Some(p) = ctx.render(id, baseline, &PromptSource::ItemsTalk(case), &mut skipped)? {
            prompts.push(p);
            sources.push(case);
        }
    }
    let (results, replies) = ctx.execute(Task::T1, &prompts)?;

    let index = CatalogIndex::from_catalog(catalog);
    let mut records = Vec::with_capacity(prompts.len());
    let mut parsed: Vec<(Vec<ItemMention>, &[_])> = Vec::new();
    let mut parse_totals = ItemListStats::default();
    for (p, r) in prompts.iter().zip(&results) {
        let mut stats = ItemListStats::default();
        let outcome = r.as_ref().ok().and_then(|reply| {
            let (o, s) = parse_item_list(&reply.raw_text, p.target_num, &index, ctx.run.fuzzy_threshold);
            stats = s;
            o.payload().cloned()
        });
        if let Some(items) = outcome.as_ref().and_then(|o| match o {
            usersim_core::Payload::ItemList { items } => Some(items.clone()),
            _ => None,
        }) {
            parse_totals.extracted += stats.extracted;
            parse_totals.matched += stats.matched;
            parse_totals.fuzzy += stats.fuzzy;
            parsed.push((items, &p.prompt_items[..]));
        }
        records.push(
            CaseRecord::new(p, r, outcome)
                .with("target_num", p.target_num)
                .with("extracted", stats.extracted)
                .with("matched", stats.matched),
        );
    }
    let sim = item_distribution(parsed.iter().map(|(m, k)| (&m[..], *k)), ctx.run.keep_unmatched);

    // The human side gets the same prompt-item removal.
    let human_mentions: Vec<Vec<ItemMention>> = sources
        .iter()
        .map(|c| c.keys().cloned().map(ItemMention::Matched).collect())
        .collect();
    let human = item_distribution(
        human_mentions
            .iter()
            .zip(&prompts)
            .map(|(m, p)| (&m[..], &p.prompt_items[..])),
        true,
    );
    let human_extracted: usize = human_mentions.iter().map(Vec::len).sum();
    let mut human_metrics = ItemMetrics::from_distribution(
        &human,
        ItemListStats {
            extracted: human_extracted,
            matched: human_extracted,
            fuzzy: 0,
            expected: None,
        },
    );
    human_metrics.dataset_entropy = dataset_entropy;

    let report = TaskReport::new(
        ctx,
        Task::T1,
        baseline,
        dataset.name(),
        records,
        skipped,
        Metrics::Items(ItemMetrics::from_distribution(&sim, parse_totals)),
        Metrics::Items(human_metrics),
    );
    Ok(TaskOutput {
        report,
        prompts,
        replies,
    })
}

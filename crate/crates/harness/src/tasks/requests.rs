use std::collections::{BTreeMap, BTreeSet};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use usersim_core::embedding::EmbeddingSet;
use usersim_core::metrics::{cosine_diversity, entropy_binned_diversity, tokenize, type_token_ratio, Stat};
use usersim_core::parse::{parse_free_text, Payload};
use usersim_core::prompt::PromptSource;
use usersim_core::source::SourceCase;
use usersim_core::{Baseline, Task};

use super::{count, CaseRecord, Metrics, TaskContext, TaskOutput, TaskReport};
use crate::embeddings::Embedder;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub lower: f64,
    pub upper: f64,
    pub members: usize,
    /// Undefined for bins with fewer than two requests.
    pub diversity: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestMetrics {
    pub requests: usize,
    pub tokens: usize,
    pub types: usize,
    pub type_token_ratio: Stat,
    /// Vocabulary words without a vector.
    pub oov_words: usize,
    /// Cosine diversity of the vocabulary's word vectors.
    pub word_diversity: Stat,
    /// Cosine diversity of the request vectors.
    pub sentence_diversity: Stat,
    /// Empty when there are fewer requests than bins.
    pub bins: Vec<BinSummary>,
    /// Requests without tokens, left out of the bins.
    pub unbinned: usize,
}

impl RequestMetrics {
    /// Measures one corpus. Embedding failures abort.
    pub fn measure(texts: &[&str], word: &Embedder, sentence: &Embedder, num_bins: usize) -> Result<Self> {
        let tokens: Vec<String> = texts.iter().flat_map(|t| tokenize(t)).collect();
        let vocab: BTreeSet<&str> = tokens.iter().map(String::as_str).collect();
        let vocab: Vec<&str> = vocab.into_iter().collect();
        let words = word.embed_words(&vocab).context("embedding vocabulary")?;
        let word_diversity = EmbeddingSet::from_embeddings(words.vectors.values())
            .map(|s| cosine_diversity(&s))
            .unwrap_or(Stat::Undefined);
        let (sentence_diversity, bins, unbinned) = if texts.is_empty() {
            (Stat::Undefined, Vec::new(), 0)
        } else {
            let vectors = sentence.embed_sentences(texts).context("embedding requests")?;
            let set = EmbeddingSet::from_embeddings(&vectors)?;
            let pairs: Vec<(&str, &[f64])> = texts.iter().copied().zip(vectors.iter().map(|v| v.values())).collect();
            let (bins, unbinned) = match entropy_binned_diversity(&pairs, num_bins) {
                Ok(b) => (
                    b.bins
                        .iter()
                        .map(|bin| BinSummary {
                            lower: bin.lower,
                            upper: bin.upper,
                            members: bin.members.len(),
                            diversity: bin.diversity,
                        })
                        .collect(),
                    b.skipped.len(),
                ),
                Err(e) => {
                    log::warn!("no entropy bins: {e}");
                    (Vec::new(), 0)
                }
            };
            (cosine_diversity(&set), bins, unbinned)
        };
        Ok(RequestMetrics {
            requests: texts.len(),
            tokens: tokens.len(),
            types: vocab.len(),
            type_token_ratio: Stat::from_option(type_token_ratio(&tokens).ok()),
            oov_words: words.oov,
            word_diversity,
            sentence_diversity,
            bins,
            unbinned,
        })
    }

    pub(super) fn scalars(&self) -> Vec<(String, Stat)> {
        let mut out = vec![
            ("requests".into(), count(self.requests)),
            ("tokens".into(), count(self.tokens)),
            ("types".into(), count(self.types)),
            ("type_token_ratio".into(), self.type_token_ratio),
            ("oov_words".into(), count(self.oov_words)),
            ("word_diversity".into(), self.word_diversity),
            ("sentence_diversity".into(), self.sentence_diversity),
            ("unbinned".into(), count(self.unbinned)),
        ];
        for (i, b) in self.bins.iter().enumerate() {
            out.push((format!("bin[{i}].members"), count(b.members)));
            out.push((format!("bin[{i}].diversity"), b.diversity));
        }
        out
    }
}

/// Recommendation requests: one synthetic request per human request,
/// naming the same movies at about the same length.
pub fn run_t4(ctx: &TaskContext<'_>, cases: &[SourceCase], word: &Embedder, sentence: &Embedder) -> Result<TaskOutput> {
    let baseline = Baseline::Vanilla;
    let mut skipped = BTreeMap::new();
    let mut prompts = Vec::new();
    let mut human: Vec<&str> = Vec::new();
    for case in cases {
        let Some(text) = case.request_text.as_deref() else {
            *skipped.entry("missing_request_text".to_string()).or_insert(0) += 1;
            continue;
        };
        if let Some(p) = ctx.render(
            format!("t4/{baseline}/{}", case.id),
            baseline,
            &PromptSource::RecRequest(case),
            &mut skipped,
        )? {
            prompts.push(p);
            human.push(text);
        }
    }
    let (results, replies) = ctx.execute(Task::T4, &prompts)?;

    let mut records = Vec::with_capacity(prompts.len());
    let mut synthetic = Vec::new();
    for (p, r) in prompts.iter().zip(&results) {
        let outcome = r
            .as_ref()
            .ok()
            .and_then(|reply| parse_free_text(&reply.raw_text).payload().cloned());
        if let Some(Payload::FreeText { text }) = &outcome {
            synthetic.push(text.clone());
        }
        records.push(CaseRecord::new(p, r, outcome).with("target_len", p.target_len));
    }
    let synthetic: Vec<&str> = synthetic.iter().map(String::as_str).collect();
    let num_bins = ctx.run.num_bins;
    let sim = RequestMetrics::measure(&synthetic, word, sentence, num_bins).context("simulator requests")?;
    let hum = RequestMetrics::measure(&human, word, sentence, num_bins).context("human requests")?;

    let report = TaskReport::new(
        ctx,
        Task::T4,
        baseline,
        "reddit",
        records,
        skipped,
        Metrics::Requests(sim),
        Metrics::Requests(hum),
    );
    Ok(TaskOutput {
        report,
        prompts,
        replies,
    })
}

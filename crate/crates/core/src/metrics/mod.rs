//! Statistics over simulator and human outcomes.
//!
//! Degenerate inputs that make a statistic meaningless (zero variance, a
//! zero centroid, no valid replies) yield [`Stat::Undefined`] rather than a
//! number; malformed inputs yield a [`MetricError`].

mod coherence;
mod diversity;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::aspect::{AspectSentiment, Sentiment};
use crate::parse::{BinaryAnswer, ItemMention};
use crate::title::CanonicalKey;

pub use coherence::{
    coherence_stats, AcceptRejectStats, CoherenceReport, CompareStats, FeedbackMode, FeedbackOutcome, FeedbackRecord,
    Polarity, PolarityCell, VariantStats,
};
pub use diversity::{
    cosine_diversity, entropy_binned_diversity, request_entropy, tokenize, type_token_ratio, BinnedDiversity,
    DiversityBin, DEFAULT_NUM_BINS, ZERO_CENTROID_TOLERANCE,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("distribution is empty")]
    EmptyDistribution,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("token corpus is empty")]
    EmptyCorpus,
    #[error("no aspect pairs")]
    NoAspects,
    #[error("number of bins must be positive")]
    ZeroBins,
    #[error("no classifiable feedback records")]
    NoClassifiableRecords,
    #[error("feedback outcome {outcome:?} is not possible in {mode:?} mode")]
    OutcomeModeMismatch {
        mode: FeedbackMode,
        outcome: FeedbackOutcome,
    },
    #[error(transparent)]
    Embedding(#[from] crate::embedding::EmbeddingError),
}

/// A statistic that may be undefined on degenerate input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stat {
    Value(f64),
    Undefined,
}

impl Stat {
    pub fn value(self) -> Option<f64> {
        match self {
            Stat::Value(v) => Some(v),
            Stat::Undefined => None,
        }
    }

    pub fn is_undefined(self) -> bool {
        self == Stat::Undefined
    }

    pub fn from_option(v: Option<f64>) -> Stat {
        v.map_or(Stat::Undefined, Stat::Value)
    }

    /// `num / den`, undefined when `den` is zero.
    pub fn ratio(num: u64, den: u64) -> Stat {
        if den == 0 {
            Stat::Undefined
        } else {
            Stat::Value(num as f64 / den as f64)
        }
    }
}

impl fmt::Display for Stat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stat::Value(v) => match f.precision() {
                Some(p) => write!(f, "{v:.p$}"),
                None => write!(f, "{v}"),
            },
            Stat::Undefined => f.write_str("Undefined"),
        }
    }
}

impl Serialize for Stat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Stat::Value(v) => s.serialize_f64(*v),
            Stat::Undefined => s.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for Stat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Stat::Value(v)),
            Repr::Str(s) if s.eq_ignore_ascii_case("undefined") => Ok(Stat::Undefined),
            Repr::Str(s) => Err(serde::de::Error::custom(alloc::format!(
                "expected a number or \"undefined\", got {s:?}"
            ))),
        }
    }
}

/// Counts over categorical outcomes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distribution {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl Distribution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, category: impl Into<String>, count: u64) {
        if count == 0 {
            return;
        }
        *self.counts.entry(category.into()).or_insert(0) += count;
        self.total += count;
    }

    pub fn observe(&mut self, category: impl Into<String>) {
        self.add(category, 1);
    }

    pub fn merge(&mut self, other: &Distribution) {
        for (k, v) in &other.counts {
            self.add(k.clone(), *v);
        }
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn count(&self, category: &str) -> u64 {
        self.counts.get(category).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn num_categories(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn probabilities(&self) -> impl Iterator<Item = (&str, f64)> {
        let total = self.total as f64;
        self.counts.iter().map(move |(k, v)| (k.as_str(), *v as f64 / total))
    }

    /// Categories by descending count, ties by category name.
    pub fn sorted_by_frequency(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<(&str, u64)> = self.counts.iter().map(|(k, c)| (k.as_str(), *c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        v
    }
}

impl<S: Into<String>> FromIterator<S> for Distribution {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut d = Distribution::new();
        for x in iter {
            d.observe(x);
        }
        d
    }
}

/// Shannon entropy in bits.
pub fn entropy(d: &Distribution) -> Result<f64, MetricError> {
    entropy_of_counts(d.counts.values().copied())
}

/// Shannon entropy in bits of raw counts; zero counts contribute nothing.
pub fn entropy_of_counts(counts: impl IntoIterator<Item = u64> + Clone) -> Result<f64, MetricError> {
    let total: u64 = counts.clone().into_iter().sum();
    if total == 0 {
        return Err(MetricError::EmptyDistribution);
    }
    let total = total as f64;
    let h: f64 = counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * libm::log2(p)
        })
        .sum();
    Ok(if h <= 0.0 { 0.0 } else { h })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositiveRate {
    pub yes: u64,
    pub no: u64,
    pub invalid: u64,
    pub rate: Stat,
}

/// Share of `Yes` among valid answers; `None` entries are invalid replies.
pub fn positive_rate(answers: impl IntoIterator<Item = Option<BinaryAnswer>>) -> PositiveRate {
    let (mut yes, mut no, mut invalid) = (0, 0, 0);
    for a in answers {
        match a {
            Some(BinaryAnswer::Yes) => yes += 1,
            Some(BinaryAnswer::No) => no += 1,
            None => invalid += 1,
        }
    }
    PositiveRate {
        yes,
        no,
        invalid,
        rate: Stat::ratio(yes, yes + no),
    }
}

/// Product-moment correlation; undefined when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Stat, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(MetricError::TooFewPoints {
            needed: 2,
            got: x.len(),
        });
    }
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if constant(x) || constant(y) {
        return Ok(Stat::Undefined);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Ok(Stat::Undefined);
    }
    let r = sxy / libm::sqrt(sxx * syy);
    Ok(Stat::Value(r.clamp(-1.0, 1.0)))
}

/// The t statistic `r √(n−2) / √(1−r²)` used for the two-sided test of
/// zero correlation, with `n − 2` degrees of freedom.
pub fn pearson_t(r: f64, n: usize) -> Option<f64> {
    if n < 3 {
        return None;
    }
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return Some(if r > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY });
    }
    Some(r * libm::sqrt(df / denom))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectStats {
    pub num_pairs: usize,
    pub num_aspects: usize,
    pub aspect_entropy: f64,
    pub sentiment_entropy: f64,
    pub sentiments: BTreeMap<Sentiment, u64>,
}

pub fn aspect_stats(pairs: &[AspectSentiment]) -> Result<AspectStats, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::NoAspects);
    }
    let aspects: Distribution = pairs.iter().map(|p| p.aspect.clone()).collect();
    let mut sentiments: BTreeMap<Sentiment, u64> = Sentiment::ALL.into_iter().map(|s| (s, 0)).collect();
    for p in pairs {
        *sentiments.entry(p.sentiment).or_insert(0) += 1;
    }
    Ok(AspectStats {
        num_pairs: pairs.len(),
        num_aspects: aspects.num_categories(),
        aspect_entropy: entropy(&aspects)?,
        sentiment_entropy: entropy_of_counts(sentiments.values().copied())?,
        sentiments,
    })
}

/// Distribution category for an item mention. Unmatched mentions get a
/// prefix so they can never collide with a catalog key.
pub fn mention_category(m: &ItemMention) -> String {
    match m {
        ItemMention::Matched(k) => k.as_str().to_string(),
        ItemMention::Unmatched(raw) => {
            let mut s = String::from("unmatched: ");
            s.extend(raw.trim().chars().flat_map(char::to_lowercase));
            s
        }
    }
}

pub fn is_unmatched_category(category: &str) -> bool {
    category.starts_with("unmatched: ")
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemDistribution {
    pub distribution: Distribution,
    /// Mentions that matched nothing in the catalog (kept or dropped).
    pub unmatched: u64,
    /// Mentions removed because the item was in the case's prompt.
    pub removed_prompt_items: u64,
}

/// Counts mentioned items over cases after removing, per case, every item
/// that appeared in that case's prompt.
pub fn item_distribution<'a, I>(cases: I, keep_unmatched: bool) -> ItemDistribution
where
    I: IntoIterator<Item = (&'a [ItemMention], &'a [CanonicalKey])>,
{
    let mut out = ItemDistribution::default();
    for (mentions, prompt_items) in cases {
        for m in mentions {
            match m {
                ItemMention::Matched(k) if prompt_items.contains(k) => out.removed_prompt_items += 1,
                ItemMention::Matched(_) => out.distribution.observe(mention_category(m)),
                ItemMention::Unmatched(_) => {
                    out.unmatched += 1;
                    if keep_unmatched {
                        out.distribution.observe(mention_category(m));
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests;

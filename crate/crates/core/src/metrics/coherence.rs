use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::{MetricError, Stat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// A comment written for this request.
    Positive,
    /// A comment from a different request.
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    AcceptReject,
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackOutcome {
    Accept,
    Reject,
    PreferPositive,
    PreferNegative,
    Neither,
    Invalid,
}

impl FeedbackOutcome {
    fn fits(self, mode: FeedbackMode) -> bool {
        match self {
            FeedbackOutcome::Invalid => true,
            FeedbackOutcome::Accept | FeedbackOutcome::Reject => mode == FeedbackMode::AcceptReject,
            _ => mode == FeedbackMode::Compare,
        }
    }
}

/// One feedback judgement. In compare mode both recommendations are shown
/// and `polarity` is always [`Polarity::Positive`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub request_id: String,
    pub polarity: Polarity,
    pub mode: FeedbackMode,
    pub outcome: FeedbackOutcome,
    pub explanation_shown: bool,
}

impl FeedbackRecord {
    pub fn new(
        request_id: impl Into<String>,
        polarity: Polarity,
        mode: FeedbackMode,
        outcome: FeedbackOutcome,
        explanation_shown: bool,
    ) -> Result<Self, MetricError> {
        if !outcome.fits(mode) {
            return Err(MetricError::OutcomeModeMismatch { mode, outcome });
        }
        let polarity = if mode == FeedbackMode::Compare {
            Polarity::Positive
        } else {
            polarity
        };
        Ok(FeedbackRecord {
            request_id: request_id.into(),
            polarity,
            mode,
            outcome,
            explanation_shown,
        })
    }
}

/// Accept/reject counts for one recommendation polarity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarityCell {
    pub accept: u64,
    pub reject: u64,
}

impl PolarityCell {
    pub fn total(&self) -> u64 {
        self.accept + self.reject
    }

    pub fn accept_rate(&self) -> Stat {
        Stat::ratio(self.accept, self.total())
    }

    pub fn reject_rate(&self) -> Stat {
        Stat::ratio(self.reject, self.total())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptRejectStats {
    pub positive: PolarityCell,
    pub negative: PolarityCell,
    pub invalid: u64,
}

impl AcceptRejectStats {
    pub fn classified(&self) -> u64 {
        self.positive.total() + self.negative.total()
    }

    /// Accepting a positive or rejecting a negative recommendation.
    pub fn coherent(&self, polarity: Polarity) -> Stat {
        match polarity {
            Polarity::Positive => self.positive.accept_rate(),
            Polarity::Negative => self.negative.reject_rate(),
        }
    }

    /// Accepting a negative recommendation (incoherent) or rejecting a
    /// positive one (likely incoherent).
    pub fn incoherent(&self, polarity: Polarity) -> Stat {
        match polarity {
            Polarity::Positive => self.positive.reject_rate(),
            Polarity::Negative => self.negative.accept_rate(),
        }
    }

    pub fn overall_coherent(&self) -> Stat {
        Stat::ratio(self.positive.accept + self.negative.reject, self.classified())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompareStats {
    pub prefer_positive: u64,
    pub prefer_negative: u64,
    pub neither: u64,
    pub invalid: u64,
}

impl CompareStats {
    pub fn classified(&self) -> u64 {
        self.prefer_positive + self.prefer_negative + self.neither
    }

    /// Preferring the positive recommendation, with `neither` excluded.
    pub fn coherent(&self) -> Stat {
        Stat::ratio(self.prefer_positive, self.prefer_positive + self.prefer_negative)
    }

    /// Share of valid replies choosing neither.
    pub fn neither_rate(&self) -> Stat {
        Stat::ratio(self.neither, self.classified())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantStats {
    pub accept_reject: AcceptRejectStats,
    pub compare: CompareStats,
}

/// Coherence tallies keyed by whether recommendation explanations were shown.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub by_explanation: BTreeMap<bool, VariantStats>,
}

impl CoherenceReport {
    pub fn variant(&self, explanation_shown: bool) -> Option<&VariantStats> {
        self.by_explanation.get(&explanation_shown)
    }
}

pub fn coherence_stats<'a>(
    records: impl IntoIterator<Item = &'a FeedbackRecord>,
) -> Result<CoherenceReport, MetricError> {
    let mut report = CoherenceReport::default();
    let mut classified = 0u64;
    for r in records {
        if !r.outcome.fits(r.mode) {
            return Err(MetricError::OutcomeModeMismatch {
                mode: r.mode,
                outcome: r.outcome,
            });
        }
        let v = report.by_explanation.entry(r.explanation_shown).or_default();
        match r.mode {
            FeedbackMode::AcceptReject => {
                let ar = &mut v.accept_reject;
                let cell = match r.polarity {
                    Polarity::Positive => &mut ar.positive,
                    Polarity::Negative => &mut ar.negative,
                };
                match r.outcome {
                    FeedbackOutcome::Accept => cell.accept += 1,
                    FeedbackOutcome::Reject => cell.reject += 1,
                    _ => {
                        ar.invalid += 1;
                        continue;
                    }
                }
            }
            FeedbackMode::Compare => {
                let c = &mut v.compare;
                match r.outcome {
                    FeedbackOutcome::PreferPositive => c.prefer_positive += 1,
                    FeedbackOutcome::PreferNegative => c.prefer_negative += 1,
                    FeedbackOutcome::Neither => c.neither += 1,
                    _ => {
                        c.invalid += 1;
                        continue;
                    }
                }
            }
        }
        classified += 1;
    }
    if classified == 0 {
        return Err(MetricError::NoClassifiableRecords);
    }
    Ok(report)
}

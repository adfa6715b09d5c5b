use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{entropy, Distribution, MetricError, Stat};
use crate::embedding::{dot, norm, EmbeddingSet};

/// Centroid norms at or below this make cosine diversity undefined.
pub const ZERO_CENTROID_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_NUM_BINS: usize = 5;

/// `1 − (1/N) Σ cos(s_i, μ̂)` with `μ̂` the centroid. Undefined when the
/// centroid (or any member) has zero norm.
pub fn cosine_diversity(set: &EmbeddingSet) -> Stat {
    let centroid = set.centroid();
    let cn = norm(&centroid);
    if cn <= ZERO_CENTROID_TOLERANCE {
        return Stat::Undefined;
    }
    let mut total = 0.0;
    for v in set.vectors() {
        let vn = norm(v);
        if vn <= ZERO_CENTROID_TOLERANCE {
            return Stat::Undefined;
        }
        total += dot(v, &centroid) / (vn * cn);
    }
    let d = 1.0 - total / set.len() as f64;
    Stat::Value(if d < 0.0 { 0.0 } else { d })
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.chars().flat_map(char::to_lowercase).collect())
        .collect()
}

/// Distinct tokens over total tokens.
pub fn type_token_ratio<S: AsRef<str>>(tokens: &[S]) -> Result<f64, MetricError> {
    if tokens.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let types: BTreeSet<&str> = tokens.iter().map(AsRef::as_ref).collect();
    Ok(types.len() as f64 / tokens.len() as f64)
}

/// Word entropy of one request, with its own tokens as the distribution.
pub fn request_entropy(text: &str) -> Result<f64, MetricError> {
    entropy(&tokenize(text).into_iter().collect::<Distribution>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityBin {
    pub lower: f64,
    pub upper: f64,
    pub members: Vec<usize>,
    /// Undefined when the bin holds fewer than two requests.
    pub diversity: Stat,
}

impl DiversityBin {
    pub fn is_empty(&self) -> bool {
        self.members.len() < 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedDiversity {
    pub entropies: Vec<f64>,
    pub bins: Vec<DiversityBin>,
    /// Requests without a single token, left out of every bin.
    pub skipped: Vec<usize>,
}

/// Splits requests into `num_bins` equal-width bins over the observed range
/// of per-request word entropy and measures cosine diversity inside each.
/// When every request has the same entropy there is a single bin.
pub fn entropy_binned_diversity<S, V>(requests: &[(S, V)], num_bins: usize) -> Result<BinnedDiversity, MetricError>
where
    S: AsRef<str>,
    V: AsRef<[f64]>,
{
    if num_bins == 0 {
        return Err(MetricError::ZeroBins);
    }
    if requests.len() < num_bins {
        return Err(MetricError::TooFewPoints {
            needed: num_bins,
            got: requests.len(),
        });
    }
    let mut entropies = Vec::with_capacity(requests.len());
    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    for (i, (text, _)) in requests.iter().enumerate() {
        match request_entropy(text.as_ref()) {
            Ok(h) => {
                entropies.push(h);
                kept.push(i);
            }
            Err(_) => {
                entropies.push(f64::NAN);
                skipped.push(i);
            }
        }
    }
    if kept.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let lo = kept.iter().map(|&i| entropies[i]).fold(f64::INFINITY, f64::min);
    let hi = kept.iter().map(|&i| entropies[i]).fold(f64::NEG_INFINITY, f64::max);
    let n = if hi > lo { num_bins } else { 1 };
    let width = (hi - lo) / n as f64;
    let mut members: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
    for &i in &kept {
        let b = if n == 1 {
            0
        } else {
            (libm::floor((entropies[i] - lo) / width) as usize).min(n - 1)
        };
        members[b].push(i);
    }
    let mut bins = Vec::with_capacity(n);
    for (b, m) in members.into_iter().enumerate() {
        let diversity = if m.len() < 2 {
            Stat::Undefined
        } else {
            cosine_diversity(&EmbeddingSet::new(m.iter().map(|&i| requests[i].1.as_ref()))?)
        };
        let lower = lo + width * b as f64;
        let upper = if b + 1 == n { hi } else { lo + width * (b + 1) as f64 };
        bins.push(DiversityBin {
            lower,
            upper,
            members: m,
            diversity,
        });
    }
    Ok(BinnedDiversity {
        entropies,
        bins,
        skipped,
    })
}

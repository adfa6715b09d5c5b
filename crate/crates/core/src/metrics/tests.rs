use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::embedding::EmbeddingSet;
use crate::parse::BinaryAnswer::{No, Yes};

fn dist(pairs: &[(&str, u64)]) -> Distribution {
    let mut d = Distribution::new();
    for (k, c) in pairs {
        d.add(*k, *c);
    }
    d
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn entropy_examples() {
    assert_eq!(entropy(&dist(&[("a", 1), ("b", 1), ("c", 1), ("d", 1)])).unwrap(), 2.0);
    assert_eq!(entropy(&dist(&[("a", 7)])).unwrap(), 0.0);
    assert_eq!(entropy(&dist(&[("A", 2), ("B", 1), ("C", 1)])).unwrap(), 1.5);
    assert_eq!(entropy(&Distribution::new()), Err(MetricError::EmptyDistribution));
    assert_eq!(entropy_of_counts([3, 0, 3]).unwrap(), 1.0);
}

#[test]
fn distribution_bookkeeping() {
    let mut d: Distribution = ["x", "y", "x"].into_iter().collect();
    d.add("z", 0);
    assert_eq!(d.total(), 3);
    assert_eq!(d.num_categories(), 2);
    assert_eq!(d.sorted_by_frequency(), [("x", 2), ("y", 1)]);
    let p: f64 = d.probabilities().map(|(_, p)| p).sum();
    assert!(close(p, 1.0, 1e-12));
    d.merge(&dist(&[("y", 2)]));
    assert_eq!(d.count("y"), 3);
}

#[test]
fn positive_rate_examples() {
    let r = positive_rate((0..100).map(|i| Some(if i < 73 { Yes } else { No })));
    assert_eq!(r.rate, Stat::Value(0.73));
    assert_eq!(positive_rate([Some(Yes), Some(Yes)]).rate, Stat::Value(1.0));
    let r = positive_rate([Some(Yes), Some(No), None]);
    assert_eq!((r.rate, r.invalid), (Stat::Value(0.5), 1));
    assert_eq!(positive_rate([None]).rate, Stat::Undefined);
}

#[test]
fn pearson_examples() {
    assert_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), Stat::Value(1.0));
    assert_eq!(pearson(&[1.0, 2.0, 3.0], &[0.1, 0.1, 0.1]).unwrap(), Stat::Undefined);
    assert!(matches!(
        pearson(&[1.0], &[1.0, 2.0]),
        Err(MetricError::LengthMismatch { .. })
    ));
    assert!(matches!(pearson(&[1.0], &[1.0]), Err(MetricError::TooFewPoints { .. })));
}

// Reference value from scipy.stats.pearsonr on the same 20 points.
pub(crate) const PEARSON_X: [f64; 20] = [
    2.174, 4.055, 3.486, 4.833, 3.0, 4.892, 2.89, 2.216, 4.474, 1.071, 4.442, 4.652, 3.29, 1.138, 4.772, 4.999, 2.811,
    3.647, 4.614, 3.381,
];
pub(crate) const PEARSON_Y: [f64; 20] = [
    0.311, 0.078, -0.198, 0.377, -0.028, 0.164, 0.561, 0.402, 0.911, 0.286, 0.202, 0.821, 0.589, 0.366, -0.085, 0.533,
    0.682, 0.011, 1.059, 0.51,
];

#[test]
fn pearson_matches_reference_package() {
    let r = pearson(&PEARSON_X, &PEARSON_Y).unwrap().value().unwrap();
    assert!(close(r, 0.11273228842576512, 1e-9), "{r}");
}

#[test]
fn cosine_diversity_examples() {
    let same = EmbeddingSet::new([vec![0.3, 0.4], vec![0.3, 0.4], vec![0.3, 0.4]]).unwrap();
    assert!(close(cosine_diversity(&same).value().unwrap(), 0.0, 1e-12));
    let axes = EmbeddingSet::new([vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let d = cosine_diversity(&axes).value().unwrap();
    assert!(close(d, 1.0 - core::f64::consts::FRAC_1_SQRT_2, 1e-12));
    assert!(close(d, 0.29289, 1e-5));
    let opposed = EmbeddingSet::new([vec![1.0, -2.0], vec![-1.0, 2.0]]).unwrap();
    assert_eq!(cosine_diversity(&opposed), Stat::Undefined);
}

#[test]
fn tokenization_and_ttr() {
    assert_eq!(tokenize("Hi, it's  ME!"), ["hi", "it", "s", "me"]);
    assert!(close(type_token_ratio(&tokenize("a b a")).unwrap(), 2.0 / 3.0, 1e-15));
    assert_eq!(type_token_ratio(&["x", "y", "z"]).unwrap(), 1.0);
    assert_eq!(type_token_ratio::<&str>(&[]), Err(MetricError::EmptyCorpus));
}

#[test]
fn aspect_stats_examples() {
    let p = |a: &str, s| AspectSentiment::new(a, s, "c", false).unwrap();
    let s = aspect_stats(&[
        p("cast", Sentiment::Positive),
        p("cast", Sentiment::Positive),
        p("plot", Sentiment::Negative),
    ])
    .unwrap();
    let h21 = -(2.0f64 / 3.0) * libm::log2(2.0 / 3.0) - (1.0f64 / 3.0) * libm::log2(1.0 / 3.0);
    assert_eq!(s.num_aspects, 2);
    assert!(close(s.aspect_entropy, h21, 1e-12) && close(s.aspect_entropy, 0.918, 5e-4));
    assert!(close(s.sentiment_entropy, h21, 1e-12));

    let s = aspect_stats(&[p("music", Sentiment::Neutral), p("Music", Sentiment::Neutral)]).unwrap();
    assert_eq!((s.num_aspects, s.aspect_entropy, s.sentiment_entropy), (1, 0.0, 0.0));

    let s = aspect_stats(&[
        p("a", Sentiment::Positive),
        p("b", Sentiment::Negative),
        p("c", Sentiment::Neutral),
    ])
    .unwrap();
    assert!(close(s.sentiment_entropy, libm::log2(3.0), 1e-12) && close(s.sentiment_entropy, 1.585, 5e-4));
    assert_eq!(aspect_stats(&[]), Err(MetricError::NoAspects));
}

#[test]
fn binned_diversity_forced_placement() {
    let reqs = [("a a a", vec![1.0, 0.0]), ("a b c d", vec![0.0, 1.0])];
    let b = entropy_binned_diversity(&reqs, 2).unwrap();
    assert_eq!(b.entropies, [0.0, 2.0]);
    assert_eq!(b.bins.len(), 2);
    assert_eq!(b.bins[0].members, [0]);
    assert_eq!(b.bins[1].members, [1]);
    assert!(b.bins.iter().all(|bin| bin.is_empty() && bin.diversity.is_undefined()));
}

#[test]
fn binned_diversity_single_bin_matches_global() {
    let reqs = [
        ("one two", vec![1.0, 0.2, 0.0]),
        ("three four", vec![0.1, 1.0, 0.3]),
        ("five six", vec![0.5, 0.5, 0.5]),
    ];
    let b = entropy_binned_diversity(&reqs, 3).unwrap();
    assert_eq!(b.bins.len(), 1);
    let global = cosine_diversity(&EmbeddingSet::new(reqs.iter().map(|r| &r.1)).unwrap());
    assert_eq!(b.bins[0].diversity, global);
    assert!(matches!(
        entropy_binned_diversity(&reqs, 4),
        Err(MetricError::TooFewPoints { .. })
    ));
    assert_eq!(entropy_binned_diversity(&reqs, 0), Err(MetricError::ZeroBins));
}

#[test]
fn blank_requests_are_skipped() {
    let reqs = [("...", vec![1.0]), ("a", vec![1.0]), ("a b", vec![2.0])];
    let b = entropy_binned_diversity(&reqs, 1).unwrap();
    assert_eq!(b.skipped, [0]);
    assert_eq!(b.bins[0].members, [1, 2]);
}

#[test]
fn coherence_examples() {
    use FeedbackMode::*;
    use FeedbackOutcome::*;
    let ar = |pol, out| FeedbackRecord::new("r", pol, AcceptReject, out, false).unwrap();
    let report = coherence_stats(&[ar(Polarity::Positive, Accept), ar(Polarity::Negative, Accept)]).unwrap();
    let v = report.variant(false).unwrap().accept_reject;
    assert_eq!(v.coherent(Polarity::Positive), Stat::Value(1.0));
    assert_eq!(v.incoherent(Polarity::Negative), Stat::Value(1.0));

    let mut recs: Vec<FeedbackRecord> = Vec::new();
    let cmp = |out| FeedbackRecord::new("r", Polarity::Positive, Compare, out, true).unwrap();
    recs.extend((0..9).map(|_| cmp(PreferPositive)));
    recs.push(cmp(PreferNegative));
    recs.push(cmp(Neither));
    recs.push(cmp(Invalid));
    let c = coherence_stats(&recs).unwrap().variant(true).unwrap().compare;
    assert_eq!(c.coherent(), Stat::Value(0.9));
    assert_eq!(c.neither_rate(), Stat::Value(1.0 / 11.0));
    assert_eq!(c.invalid, 1);

    assert!(FeedbackRecord::new("r", Polarity::Positive, Compare, Accept, false).is_err());
    assert_eq!(
        coherence_stats(&[cmp(Invalid)]),
        Err(MetricError::NoClassifiableRecords)
    );
}

#[test]
fn item_distribution_removes_prompt_items() {
    let k = |s: &str| CanonicalKey::from_raw(s);
    let a = ItemMention::Matched(k("a (2000)"));
    let b = ItemMention::Matched(k("b (2001)"));
    let u = ItemMention::Unmatched("Nope (1999)".into());
    let prompt_a = [k("a (2000)")];
    let only_prompt = [a.clone()];
    let both = [a.clone(), b.clone(), u.clone()];
    let d = item_distribution([(&only_prompt[..], &prompt_a[..])], true);
    assert!(d.distribution.is_empty());
    let d = item_distribution([(&both[..], &prompt_a[..])], true);
    assert_eq!(d.distribution.count("b (2001)"), 1);
    assert_eq!(d.distribution.count("unmatched: nope (1999)"), 1);
    assert_eq!((d.unmatched, d.removed_prompt_items), (1, 1));
    let d = item_distribution([(&both[..], &prompt_a[..])], false);
    assert_eq!(d.distribution.total(), 1);
}

#[test]
fn stat_serde_round_trip() {
    let s = Stat::Undefined;
    assert_eq!(alloc::format!("{s}"), "Undefined");
    assert_eq!(alloc::format!("{:.2}", Stat::Value(0.123)), "0.12");
}

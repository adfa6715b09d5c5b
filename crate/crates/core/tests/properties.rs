use proptest::prelude::*;

use usersim_core::embedding::EmbeddingSet;
use usersim_core::metrics::{
    coherence_stats, cosine_diversity, entropy, pearson, Distribution, FeedbackMode, FeedbackOutcome, FeedbackRecord,
    Polarity, Stat,
};
use usersim_core::parse::{debias, parse_agent_choice, parse_item_list, AgentChoice, CatalogIndex, Preference};
use usersim_core::persona::{assign_agents, sample_negative_index, AgentSlot};
use usersim_core::seed::case_rng;
use usersim_core::title::normalize_title_text;

fn distribution(counts: &[u64]) -> Distribution {
    let mut d = Distribution::new();
    for (i, c) in counts.iter().enumerate() {
        d.add(format!("c{i:03}"), *c);
    }
    d
}

proptest! {
    #[test]
    fn entropy_bounded_by_support(counts in prop::collection::vec(0u64..50, 1..40)) {
        prop_assume!(counts.iter().any(|c| *c > 0));
        let d = distribution(&counts);
        let h = entropy(&d).unwrap();
        let support = counts.iter().filter(|c| **c > 0).count() as f64;
        prop_assert!(h >= 0.0);
        prop_assert!(h <= support.log2() + 1e-9);
    }

    #[test]
    fn entropy_tight_at_uniform(k in 1usize..60, c in 1u64..20) {
        let h = entropy(&distribution(&vec![c; k])).unwrap();
        prop_assert!((h - (k as f64).log2()).abs() < 1e-9);
    }

    #[test]
    fn entropy_permutation_and_scale_invariant(
        counts in prop::collection::vec(1u64..30, 1..30),
        scale in 1u64..9,
        seed in any::<u64>(),
    ) {
        let base = entropy(&distribution(&counts)).unwrap();
        let mut shuffled = counts.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut case_rng(seed, "shuffle"));
        let scaled: Vec<u64> = counts.iter().map(|c| c * scale).collect();
        prop_assert!((entropy(&distribution(&shuffled)).unwrap() - base).abs() < 1e-9);
        prop_assert!((entropy(&distribution(&scaled)).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn pearson_bounded_and_affine_invariant(
        pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
        a in 0.1f64..10.0, b in -50.0f64..50.0,
        c in 0.1f64..10.0, d in -50.0f64..50.0,
    ) {
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        if let Stat::Value(r) = pearson(&x, &y).unwrap() {
            prop_assert!(r.abs() <= 1.0);
            let x2: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let y2: Vec<f64> = y.iter().map(|v| c * v + d).collect();
            let r2 = pearson(&x2, &y2).unwrap().value().unwrap();
            prop_assert!((r - r2).abs() < 1e-9, "{r} vs {r2}");
        }
    }

    #[test]
    fn cosine_diversity_scale_and_rotation_invariant(
        vs in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 1..20),
        scale in 0.01f64..100.0,
        theta in 0.0f64..std::f64::consts::TAU,
    ) {
        let base = cosine_diversity(&EmbeddingSet::new(&vs).unwrap());
        let scaled: Vec<Vec<f64>> = vs.iter().map(|v| v.iter().map(|x| x * scale).collect()).collect();
        let (s, c) = theta.sin_cos();
        let rotated: Vec<Vec<f64>> = vs.iter().map(|v| vec![c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]]).collect();
        for other in [scaled, rotated] {
            let o = cosine_diversity(&EmbeddingSet::new(&other).unwrap());
            // Near-zero centroids may flip across the tolerance under scaling.
            if let (Stat::Value(x), Stat::Value(y)) = (base, o) {
                prop_assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }
        if let Stat::Value(x) = base {
            prop_assert!((0.0..=2.0).contains(&x));
        }
    }

    #[test]
    fn accept_reject_cells_sum_to_one(outcomes in prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 1..80)) {
        let recs: Vec<FeedbackRecord> = outcomes
            .iter()
            .map(|&(pos, accept, shown)| {
                let pol = if pos { Polarity::Positive } else { Polarity::Negative };
                let out = if accept { FeedbackOutcome::Accept } else { FeedbackOutcome::Reject };
                FeedbackRecord::new("r", pol, FeedbackMode::AcceptReject, out, shown).unwrap()
            })
            .collect();
        let report = coherence_stats(&recs).unwrap();
        for v in report.by_explanation.values() {
            for pol in [Polarity::Positive, Polarity::Negative] {
                if let (Stat::Value(a), Stat::Value(b)) = (v.accept_reject.coherent(pol), v.accept_reject.incoherent(pol)) {
                    prop_assert!((a + b - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn compare_debias_invariant_under_slot_swap(
        draws in prop::collection::vec((0u8..3, any::<u64>()), 1..60),
    ) {
        let tally = |swap: bool| {
            let mut recs = Vec::new();
            for (label, seed) in &draws {
                let a = assign_agents("pos", "neg", &mut case_rng(*seed, "a"));
                let choice = match label { 0 => AgentChoice::Agent1, 1 => AgentChoice::Agent2, _ => AgentChoice::Neither };
                let (choice, slot) = if swap {
                    let c = match choice { AgentChoice::Agent1 => AgentChoice::Agent2, AgentChoice::Agent2 => AgentChoice::Agent1, n => n };
                    (c, a.positive_slot.other())
                } else {
                    (choice, a.positive_slot)
                };
                let out = match debias(choice, slot) {
                    Preference::Positive => FeedbackOutcome::PreferPositive,
                    Preference::Negative => FeedbackOutcome::PreferNegative,
                    Preference::Neither => FeedbackOutcome::Neither,
                };
                recs.push(FeedbackRecord::new("r", Polarity::Positive, FeedbackMode::Compare, out, false).unwrap());
            }
            coherence_stats(&recs).unwrap()
        };
        prop_assert_eq!(tally(false), tally(true));
    }

    #[test]
    fn title_normalization_idempotent(s in "[ A-Za-z0-9,'&:!?éüñ-]{1,40}") {
        if let Ok(once) = normalize_title_text(&s) {
            prop_assert_eq!(normalize_title_text(&once).unwrap(), once);
        }
    }

    #[test]
    fn parsing_is_idempotent(raw in "[ A-Za-z0-9(),.\n-]{0,80}") {
        let index = CatalogIndex::from_keys(&[]);
        let copy = raw.clone();
        let a = parse_item_list(&raw, None, &index, 0.15);
        let b = parse_item_list(&raw, None, &index, 0.15);
        prop_assert_eq!(a, b);
        prop_assert_eq!(parse_agent_choice(&raw), parse_agent_choice(&raw));
        prop_assert_eq!(raw, copy);
    }

    #[test]
    fn negative_never_equals_target(n in 2usize..200, t in 0usize..200, seed in any::<u64>()) {
        prop_assume!(t < n);
        let neg = sample_negative_index(t, n, &mut case_rng(seed, "neg")).unwrap();
        prop_assert!(neg != t && neg < n);
    }

    #[test]
    fn assignment_holds_positive_in_its_slot(seed in any::<u64>()) {
        let a = assign_agents("p", "n", &mut case_rng(seed, "x"));
        let held = if a.positive_slot == AgentSlot::Agent1 { &a.agent1 } else { &a.agent2 };
        prop_assert_eq!(held.as_str(), "p");
    }
}

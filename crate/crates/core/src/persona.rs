//! Demographic personas and the randomized pieces of the feedback task.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::protocol::Baseline;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PersonaError {
    #[error("surname table is empty")]
    NoSurnames,
    #[error("need at least two requests with a head comment to draw a negative, found {0}")]
    TooFewRequests(usize),
    #[error("request index {0} is out of range")]
    NoSuchRequest(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Honorific {
    Mr,
    Ms,
}

impl Honorific {
    pub fn as_prefix(self) -> &'static str {
        match self {
            Honorific::Mr => "Mr.",
            Honorific::Ms => "Ms.",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pickiness {
    NotPicky,
    ModeratelyPicky,
    ExtremelyPicky,
}

impl Pickiness {
    pub const ALL: [Pickiness; 3] = [
        Pickiness::NotPicky,
        Pickiness::ModeratelyPicky,
        Pickiness::ExtremelyPicky,
    ];

    pub fn phrase(self) -> &'static str {
        match self {
            Pickiness::NotPicky => "not picky",
            Pickiness::ModeratelyPicky => "moderately picky",
            Pickiness::ExtremelyPicky => "extremely picky",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PersonaSpec {
    pub title: Honorific,
    pub surname: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pickiness: Option<Pickiness>,
}

/// Pooled surnames across demographic groups, deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurnamePool {
    names: Vec<String>,
}

impl SurnamePool {
    /// Pools the names, title-casing each (`"GUZMAN"` → `"Guzman"`) and
    /// keeping the first occurrence of duplicates.
    pub fn new<I, S>(names: I) -> Result<Self, PersonaError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = BTreeSet::new();
        let mut pooled = Vec::new();
        for name in names {
            let name = title_case(name.as_ref().trim());
            if !name.is_empty() && seen.insert(name.clone()) {
                pooled.push(name);
            }
        }
        if pooled.is_empty() {
            return Err(PersonaError::NoSurnames);
        }
        Ok(SurnamePool { names: pooled })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }
}

fn title_case(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut start = true;
    for c in s.chars() {
        if start {
            out.extend(c.to_uppercase());
        } else {
            out.extend(c.to_lowercase());
        }
        start = !c.is_alphabetic();
    }
    out
}

/// Title and surname uniformly at random; pickiness uniformly over the
/// three levels for DI+PP only.
pub fn sample_persona<R: Rng + ?Sized>(baseline: Baseline, pool: &SurnamePool, rng: &mut R) -> PersonaSpec {
    let title = if rng.random_bool(0.5) {
        Honorific::Mr
    } else {
        Honorific::Ms
    };
    let surname = pool.names.choose(rng).cloned().expect("pool is never empty");
    let pickiness = (baseline == Baseline::DiPp).then(|| *Pickiness::ALL.choose(rng).expect("three levels"));
    PersonaSpec {
        title,
        surname,
        pickiness,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentSlot {
    #[serde(rename = "agent1")]
    Agent1,
    #[serde(rename = "agent2")]
    Agent2,
}

impl AgentSlot {
    pub fn other(self) -> AgentSlot {
        match self {
            AgentSlot::Agent1 => AgentSlot::Agent2,
            AgentSlot::Agent2 => AgentSlot::Agent1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentAssignment {
    pub agent1: String,
    pub agent2: String,
    /// Slot that holds the positive recommendation.
    pub positive_slot: AgentSlot,
}

/// Places the positive recommendation in either slot with probability 1/2.
pub fn assign_agents<R: Rng + ?Sized>(positive: &str, negative: &str, rng: &mut R) -> AgentAssignment {
    let positive_slot = if rng.random_bool(0.5) {
        AgentSlot::Agent1
    } else {
        AgentSlot::Agent2
    };
    let (agent1, agent2) = match positive_slot {
        AgentSlot::Agent1 => (positive, negative),
        AgentSlot::Agent2 => (negative, positive),
    };
    AgentAssignment {
        agent1: agent1.into(),
        agent2: agent2.into(),
        positive_slot,
    }
}

/// Index of a request other than `target`, drawn uniformly.
pub fn sample_negative_index<R: Rng + ?Sized>(
    target: usize,
    num_requests: usize,
    rng: &mut R,
) -> Result<usize, PersonaError> {
    if num_requests < 2 {
        return Err(PersonaError::TooFewRequests(num_requests));
    }
    if target >= num_requests {
        return Err(PersonaError::NoSuchRequest(target));
    }
    let pick = rng.random_range(0..num_requests - 1);
    Ok(if pick >= target { pick + 1 } else { pick })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::case_rng;

    fn pool() -> SurnamePool {
        SurnamePool::new(["GUZMAN", "LI", "SMITH", "Li", "NGUYEN", "BEGAY"]).unwrap()
    }

    #[test]
    fn pool_dedups_and_title_cases() {
        let p = pool();
        assert_eq!(p.names(), ["Guzman", "Li", "Smith", "Nguyen", "Begay"]);
        assert!(SurnamePool::new(Vec::<String>::new()).is_err());
        assert_eq!(SurnamePool::new(["O'NEIL"]).unwrap().names(), ["O'Neil"]);
    }

    #[test]
    fn di_has_no_pickiness() {
        let mut rng = case_rng(1, "p");
        for _ in 0..50 {
            let p = sample_persona(Baseline::Di, &pool(), &mut rng);
            assert!(p.pickiness.is_none());
            assert!(pool().contains(&p.surname));
            assert!(sample_persona(Baseline::DiPp, &pool(), &mut rng).pickiness.is_some());
        }
    }

    #[test]
    fn pickiness_levels_are_uniform() {
        let mut rng = case_rng(2024, "pickiness");
        let pool = pool();
        let mut counts = [0usize; 3];
        let n = 30_000;
        for _ in 0..n {
            let p = sample_persona(Baseline::DiPp, &pool, &mut rng).pickiness.unwrap();
            counts[Pickiness::ALL.iter().position(|x| *x == p).unwrap()] += 1;
        }
        let expected = n as f64 / 3.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 2 degrees of freedom, 0.999 quantile
        assert!(chi2 < 13.82, "chi2 = {chi2}");
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() <= 0.02);
        }
    }

    #[test]
    fn agent_assignment_bookkeeping_and_balance() {
        let mut rng = case_rng(5, "agents");
        let mut slot1 = 0;
        for _ in 0..10_000 {
            let a = assign_agents("pos", "neg", &mut rng);
            let held = match a.positive_slot {
                AgentSlot::Agent1 => &a.agent1,
                AgentSlot::Agent2 => &a.agent2,
            };
            assert_eq!(held, "pos");
            if a.positive_slot == AgentSlot::Agent1 {
                slot1 += 1;
            }
        }
        assert!((slot1 as f64 / 10_000.0 - 0.5).abs() <= 0.015);
    }

    #[test]
    fn swapped_inputs_mirror() {
        let a = assign_agents("x", "y", &mut case_rng(9, "s"));
        let b = assign_agents("y", "x", &mut case_rng(9, "s"));
        assert_eq!(a.agent1, b.agent2);
        assert_eq!(a.agent2, b.agent1);
    }

    #[test]
    fn negatives() {
        let mut rng = case_rng(3, "neg");
        for _ in 0..20 {
            assert_eq!(sample_negative_index(0, 2, &mut rng).unwrap(), 1);
            assert_eq!(sample_negative_index(1, 2, &mut rng).unwrap(), 0);
            assert_ne!(sample_negative_index(3, 7, &mut rng).unwrap(), 3);
        }
        assert_eq!(
            sample_negative_index(0, 1, &mut rng),
            Err(PersonaError::TooFewRequests(1))
        );
        let a: Vec<usize> = (0..10)
            .map(|i| sample_negative_index(i, 10, &mut case_rng(1, "n")).unwrap())
            .collect();
        let b: Vec<usize> = (0..10)
            .map(|i| sample_negative_index(i, 10, &mut case_rng(1, "n")).unwrap())
            .collect();
        assert_eq!(a, b);
    }
}

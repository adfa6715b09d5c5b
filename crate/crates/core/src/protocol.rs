//! The five tasks and the prompting baselines.

use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Choosing items to talk about.
    T1,
    /// Binary preference.
    T2,
    /// Open-ended preference.
    T3,
    /// Recommendation requests.
    T4,
    /// Feedback on recommendations.
    T5,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::T1, Task::T2, Task::T3, Task::T4, Task::T5];

    pub fn id(self) -> &'static str {
        match self {
            Task::T1 => "t1",
            Task::T2 => "t2",
            Task::T3 => "t3",
            Task::T4 => "t4",
            Task::T5 => "t5",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::T1 => "ItemsTalk",
            Task::T2 => "BinPref",
            Task::T3 => "OpenPref",
            Task::T4 => "RecRequest",
            Task::T5 => "Feedback",
        }
    }

    pub fn parse(s: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.id().eq_ignore_ascii_case(s))
    }

    /// Baselines a task can be run with.
    pub fn baselines(self) -> &'static [Baseline] {
        match self {
            Task::T1 => &[Baseline::Di, Baseline::Ih],
            Task::T2 | Task::T3 => &[Baseline::Di, Baseline::DiPp],
            Task::T4 | Task::T5 => &[Baseline::Vanilla],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Baseline {
    /// No conditioning.
    #[serde(rename = "vanilla")]
    Vanilla,
    /// Demographic information (title and surname).
    #[serde(rename = "di")]
    Di,
    /// Demographic information plus a pickiness level.
    #[serde(rename = "di-pp")]
    DiPp,
    /// Interaction history from a real user.
    #[serde(rename = "ih")]
    Ih,
}

impl Baseline {
    pub fn id(self) -> &'static str {
        match self {
            Baseline::Vanilla => "vanilla",
            Baseline::Di => "di",
            Baseline::DiPp => "di-pp",
            Baseline::Ih => "ih",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Baseline::Vanilla => "Vanilla LLM",
            Baseline::Di => "Demographic information",
            Baseline::DiPp => "Demographic information + Pickiness",
            Baseline::Ih => "Interaction history",
        }
    }

    pub fn parse(s: &str) -> Option<Baseline> {
        [Baseline::Vanilla, Baseline::Di, Baseline::DiPp, Baseline::Ih]
            .into_iter()
            .find(|b| b.id().eq_ignore_ascii_case(s) || (s.eq_ignore_ascii_case("di_pp") && *b == Baseline::DiPp))
    }

    pub fn uses_persona(self) -> bool {
        matches!(self, Baseline::Di | Baseline::DiPp)
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

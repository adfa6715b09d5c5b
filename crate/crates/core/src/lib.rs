//! Core data model, prompt construction, reply parsing and statistics for
//! evaluating LLM user simulators on conversational recommendation tasks.
//!
//! Everything here is pure and `no_std` (with `alloc`). File formats, the
//! model gateway and the CLI live in the `usersim` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod aspect;
pub mod catalog;
pub mod embedding;
pub mod metrics;
pub mod parse;
pub mod persona;
pub mod prompt;
pub mod protocol;
pub mod seed;
pub mod source;
pub mod template;
pub mod title;

pub use aspect::{AspectSentiment, Sentiment};
pub use catalog::{Item, ItemCatalog, MovieRating, RatingStats};
pub use embedding::{EmbeddingSet, EmbeddingVector};
pub use metrics::{Distribution, MetricError, Stat};
pub use parse::{ParsedOutcome, Payload};
pub use protocol::{Baseline, Task};
pub use source::{Dataset, SourceCase};
pub use title::CanonicalKey;

//! Items, catalogs, and MovieLens rating statistics.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::{Bound, RangeBounds};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::title::{self, CanonicalKey, TitleError, MAX_YEAR};

/// Ratings at or above this value count as the rater liking the movie.
pub const LIKED_THRESHOLD: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CatalogError {
    #[error(transparent)]
    Title(#[from] TitleError),
    #[error("{title:?} ({year}) is newer than {MAX_YEAR}")]
    TooRecent { title: String, year: i32 },
    #[error("{0:?} does not carry a (yyyy) year")]
    MissingYear(String),
    #[error("rating {0} outside the 0.5..=5 scale")]
    RatingOutOfScale(f64),
    #[error("no ratings were ingested")]
    EmptyRatings,
    #[error("group {group:?}: only {eligible} eligible movies, {requested} requested")]
    InsufficientPool {
        group: String,
        eligible: usize,
        requested: usize,
    },
    #[error("count recorded for unknown item {0}")]
    UnknownItem(CanonicalKey),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub key: CanonicalKey,
    pub title: String,
    pub year: i32,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub source_ids: BTreeMap<String, String>,
}

impl Item {
    /// Admits `(title, year)` as an item. Years after [`MAX_YEAR`] are rejected.
    pub fn new(title: &str, year: i32) -> Result<Self, CatalogError> {
        if year > MAX_YEAR {
            return Err(CatalogError::TooRecent {
                title: title.into(),
                year,
            });
        }
        let display = title::display_title(title);
        let key = title::normalize_title(&display, year)?;
        Ok(Item {
            key,
            title: display,
            year,
            source_ids: BTreeMap::new(),
        })
    }

    /// Parses `"Title (yyyy)"`.
    pub fn parse(titled: &str) -> Result<Self, CatalogError> {
        let (t, y) = title::split_title_year(titled).ok_or_else(|| CatalogError::MissingYear(titled.into()))?;
        Item::new(t, y)
    }

    pub fn with_source_id(mut self, dataset: &str, id: impl Into<String>) -> Self {
        self.source_ids.insert(dataset.into(), id.into());
        self
    }

    /// `"Title (yyyy)"`, the form used inside prompts.
    pub fn display(&self) -> String {
        alloc::format!("{} ({})", self.title, self.year)
    }
}

/// The universe of items a dataset talks about, with mention counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ItemCatalog {
    items: BTreeMap<CanonicalKey, Item>,
    counts: BTreeMap<CanonicalKey, u64>,
}

impl ItemCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an item; an existing entry under the same key keeps its title
    /// and gains the new source ids.
    pub fn insert(&mut self, item: Item) {
        match self.items.get_mut(&item.key) {
            Some(existing) => {
                for (k, v) in item.source_ids {
                    existing.source_ids.entry(k).or_insert(v);
                }
            }
            None => {
                self.items.insert(item.key.clone(), item);
            }
        }
    }

    pub fn record_mention(&mut self, key: &CanonicalKey) -> Result<(), CatalogError> {
        if !self.items.contains_key(key) {
            return Err(CatalogError::UnknownItem(key.clone()));
        }
        *self.counts.entry(key.clone()).or_insert(0) += 1;
        Ok(())
    }

    pub fn insert_mentioned(&mut self, item: Item) {
        let key = item.key.clone();
        self.insert(item);
        *self.counts.entry(key).or_insert(0) += 1;
    }

    pub fn merge(&mut self, other: &ItemCatalog) {
        for item in other.items.values() {
            self.insert(item.clone());
        }
        for (k, c) in &other.counts {
            *self.counts.entry(k.clone()).or_insert(0) += c;
        }
    }

    pub fn get(&self, key: &CanonicalKey) -> Option<&Item> {
        self.items.get(key)
    }

    pub fn contains(&self, key: &CanonicalKey) -> bool {
        self.items.contains_key(key)
    }

    pub fn count(&self, key: &CanonicalKey) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<CanonicalKey, u64> {
        &self.counts
    }

    pub fn items(&self) -> impl Iterator<Item = &Item> {
        self.items.values()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Running totals for one movie's ratings.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RatingTally {
    pub count: u64,
    pub sum: f64,
    pub liked: u64,
}

impl RatingTally {
    pub fn add(&mut self, rating: f64) -> Result<(), CatalogError> {
        if !(0.5..=5.0).contains(&rating) {
            return Err(CatalogError::RatingOutOfScale(rating));
        }
        self.count += 1;
        self.sum += rating;
        if rating >= LIKED_THRESHOLD {
            self.liked += 1;
        }
        Ok(())
    }

    fn merge(&mut self, other: &RatingTally) {
        self.count += other.count;
        self.sum += other.sum;
        self.liked += other.liked;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovieRating {
    /// Prompt form, `"Title (yyyy)"`.
    pub title: String,
    pub num_ratings: u64,
    pub avg_rating: f64,
    /// Ratings at or above [`LIKED_THRESHOLD`].
    pub num_liked: u64,
}

impl MovieRating {
    /// Share of raters who liked the movie; the human counterpart of a
    /// simulator positive rate.
    pub fn liked_rate(&self) -> f64 {
        self.num_liked as f64 / self.num_ratings as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingStats {
    pub per_movie: BTreeMap<CanonicalKey, MovieRating>,
}

impl RatingStats {
    /// Folds per-source tallies into per-item statistics. Tallies that map
    /// to the same canonical key are combined before averaging.
    pub fn from_tallies<'a>(tallies: impl IntoIterator<Item = (&'a Item, RatingTally)>) -> Result<Self, CatalogError> {
        let mut merged: BTreeMap<CanonicalKey, (String, RatingTally)> = BTreeMap::new();
        for (item, tally) in tallies {
            if tally.count == 0 {
                continue;
            }
            merged
                .entry(item.key.clone())
                .or_insert_with(|| (item.display(), RatingTally::default()))
                .1
                .merge(&tally);
        }
        if merged.is_empty() {
            return Err(CatalogError::EmptyRatings);
        }
        let per_movie = merged
            .into_iter()
            .map(|(k, (title, t))| {
                let rating = MovieRating {
                    title,
                    num_ratings: t.count,
                    avg_rating: t.sum / t.count as f64,
                    num_liked: t.liked,
                };
                (k, rating)
            })
            .collect();
        Ok(RatingStats { per_movie })
    }

    pub fn get(&self, key: &CanonicalKey) -> Option<&MovieRating> {
        self.per_movie.get(key)
    }

    pub fn len(&self) -> usize {
        self.per_movie.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_movie.is_empty()
    }
}

/// One sampled movie group: rating-count bounds and a sample size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    pub lower: Bound<u64>,
    pub upper: Bound<u64>,
    pub sample_size: usize,
}

impl GroupSpec {
    /// At least 5000 ratings, 200 movies.
    pub fn frequent() -> Self {
        GroupSpec {
            name: "frequent".into(),
            lower: Bound::Included(5000),
            upper: Bound::Unbounded,
            sample_size: 200,
        }
    }

    /// Strictly between 50 and 500 ratings, 200 movies.
    pub fn infrequent() -> Self {
        GroupSpec {
            name: "infrequent".into(),
            lower: Bound::Excluded(50),
            upper: Bound::Excluded(500),
            sample_size: 200,
        }
    }

    /// Any rating count, 300 movies.
    pub fn random() -> Self {
        GroupSpec {
            name: "random".into(),
            lower: Bound::Unbounded,
            upper: Bound::Unbounded,
            sample_size: 300,
        }
    }

    pub fn with_size(mut self, sample_size: usize) -> Self {
        self.sample_size = sample_size;
        self
    }

    pub fn admits(&self, count: u64) -> bool {
        (self.lower, self.upper).contains(&count)
    }
}

/// Samples each group uniformly without replacement from the movies whose
/// rating count satisfies the group bounds. Members come back sorted by key.
pub fn sample_movie_groups<R: Rng + ?Sized>(
    stats: &RatingStats,
    specs: &[GroupSpec],
    rng: &mut R,
) -> Result<BTreeMap<String, Vec<CanonicalKey>>, CatalogError> {
    if stats.is_empty() {
        return Err(CatalogError::EmptyRatings);
    }
    let mut groups = BTreeMap::new();
    for spec in specs {
        let eligible: Vec<&CanonicalKey> = stats
            .per_movie
            .iter()
            .filter(|(_, r)| spec.admits(r.num_ratings))
            .map(|(k, _)| k)
            .collect();
        if eligible.len() < spec.sample_size {
            return Err(CatalogError::InsufficientPool {
                group: spec.name.clone(),
                eligible: eligible.len(),
                requested: spec.sample_size,
            });
        }
        let mut picked: Vec<CanonicalKey> = rand::seq::index::sample(rng, eligible.len(), spec.sample_size)
            .into_iter()
            .map(|i| eligible[i].clone())
            .collect();
        picked.sort();
        groups.insert(spec.name.clone(), picked);
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stats_with_counts(counts: &[u64]) -> RatingStats {
        let items: Vec<Item> = (0..counts.len())
            .map(|i| Item::new(&alloc::format!("Movie {i}"), 2000).unwrap())
            .collect();
        let tallies = items.iter().zip(counts).map(|(item, &c)| {
            let mut t = RatingTally::default();
            for _ in 0..c {
                t.add(3.0).unwrap();
            }
            (item, t)
        });
        RatingStats::from_tallies(tallies).unwrap()
    }

    #[test]
    fn mean_of_ratings() {
        let item = Item::parse("Heat (1995)").unwrap();
        let mut t = RatingTally::default();
        for r in [4.0, 4.0, 5.0] {
            t.add(r).unwrap();
        }
        let stats = RatingStats::from_tallies([(&item, t)]).unwrap();
        let m = stats.get(&item.key).unwrap();
        assert_eq!(m.num_ratings, 3);
        assert!((m.avg_rating - 13.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.num_liked, 3);
        assert_eq!(m.title, "Heat (1995)");
    }

    #[test]
    fn rating_scale_and_empty_stream() {
        let mut t = RatingTally::default();
        assert!(t.add(5.5).is_err());
        assert!(t.add(0.0).is_err());
        assert!(t.add(0.5).is_ok());
        let none: [(&Item, RatingTally); 0] = [];
        assert_eq!(RatingStats::from_tallies(none), Err(CatalogError::EmptyRatings));
    }

    #[test]
    fn items_after_2021_rejected() {
        assert!(matches!(Item::new("Dune", 2021), Ok(Item { year: 2021, .. })));
        assert!(matches!(Item::new("Dune", 2022), Err(CatalogError::TooRecent { .. })));
        assert!(matches!(Item::parse("Dune"), Err(CatalogError::MissingYear(_))));
    }

    #[test]
    fn group_bounds() {
        assert!(GroupSpec::frequent().admits(6000));
        assert!(GroupSpec::frequent().admits(5000));
        assert!(!GroupSpec::frequent().admits(4999));
        assert!(!GroupSpec::infrequent().admits(30));
        assert!(!GroupSpec::infrequent().admits(50));
        assert!(GroupSpec::infrequent().admits(51));
        assert!(!GroupSpec::infrequent().admits(500));
        assert!(GroupSpec::random().admits(1));
    }

    #[test]
    fn groups_deterministic_and_within_bounds() {
        let counts: Vec<u64> = (0..500).map(|i| (i % 25) * 5 + 1).collect();
        let stats = stats_with_counts(&counts);
        let specs = [
            GroupSpec {
                name: "mid".into(),
                lower: Bound::Excluded(50),
                upper: Bound::Excluded(100),
                sample_size: 40,
            },
            GroupSpec::random().with_size(100),
        ];
        let a = sample_movie_groups(&stats, &specs, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_movie_groups(&stats, &specs, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        let mid = &a["mid"];
        assert_eq!(mid.len(), 40);
        let mut dedup = mid.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 40);
        for k in mid {
            assert!(specs[0].admits(stats.get(k).unwrap().num_ratings));
        }
    }

    #[test]
    fn insufficient_pool_names_group() {
        let stats = stats_with_counts(&[10, 20, 6000]);
        let err = sample_movie_groups(&stats, &[GroupSpec::frequent()], &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, CatalogError::InsufficientPool { ref group, eligible: 1, .. } if group == "frequent"));
    }

    #[test]
    fn catalog_counts_only_known_items() {
        let mut cat = ItemCatalog::new();
        let item = Item::parse("Oldboy (2003)").unwrap();
        let key = item.key.clone();
        cat.insert_mentioned(item);
        cat.record_mention(&key).unwrap();
        assert_eq!(cat.count(&key), 2);
        let stray = CanonicalKey::from_raw("nothing (1900)");
        assert!(cat.record_mention(&stray).is_err());
    }
}

use std::collections::BTreeMap;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use usersim_core::catalog::{sample_movie_groups, GroupSpec, RatingStats};
use usersim_core::metrics::{pearson, pearson_t, positive_rate, Stat};
use usersim_core::parse::{parse_binary, BinaryAnswer};
use usersim_core::prompt::{PromptCase, PromptSource};
use usersim_core::seed::case_rng;
use usersim_core::{Baseline, CanonicalKey, Task};

use super::{check_baseline, count, CaseRecord, Metrics, TaskContext, TaskOutput, TaskReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovieRate {
    pub key: CanonicalKey,
    pub title: String,
    pub avg_rating: f64,
    pub num_ratings: u64,
    pub positive_rate: Stat,
    pub yes: u64,
    pub no: u64,
    pub invalid: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceMetrics {
    pub movies: usize,
    /// Movies without a single valid answer, left out of the correlation.
    pub excluded_movies: usize,
    /// Average rating against positive rate.
    pub pearson: Stat,
    /// Two-sided t-test of zero correlation.
    pub p_value: Stat,
    pub mean_positive_rate: Stat,
    pub series: Vec<MovieRate>,
}

/// Two-sided p-value of a sample correlation `r` over `n` points.
pub fn pearson_p_value(r: Stat, n: usize) -> Stat {
    let Stat::Value(r) = r else { return Stat::Undefined };
    let Some(t) = pearson_t(r, n) else {
        return Stat::Undefined;
    };
    if t.is_infinite() {
        return Stat::Value(0.0);
    }
    match StudentsT::new(0.0, 1.0, (n - 2) as f64) {
        Ok(dist) => Stat::Value(2.0 * dist.sf(t.abs())),
        Err(_) => Stat::Undefined,
    }
}

impl PreferenceMetrics {
    fn from_series(series: Vec<MovieRate>) -> Self {
        let rated: Vec<&MovieRate> = series.iter().filter(|m| !m.positive_rate.is_undefined()).collect();
        let x: Vec<f64> = rated.iter().map(|m| m.avg_rating).collect();
        let y: Vec<f64> = rated.iter().filter_map(|m| m.positive_rate.value()).collect();
        let r = pearson(&x, &y).unwrap_or(Stat::Undefined);
        let mean = if y.is_empty() {
            Stat::Undefined
        } else {
            Stat::Value(y.iter().sum::<f64>() / y.len() as f64)
        };
        PreferenceMetrics {
            movies: series.len(),
            excluded_movies: series.len() - rated.len(),
            pearson: r,
            p_value: pearson_p_value(r, rated.len()),
            mean_positive_rate: mean,
            series,
        }
    }

    pub(super) fn scalars(&self) -> Vec<(String, Stat)> {
        let mut out = vec![
            ("movies".into(), count(self.movies)),
            ("excluded_movies".into(), count(self.excluded_movies)),
            ("pearson".into(), self.pearson),
            ("p_value".into(), self.p_value),
            ("mean_positive_rate".into(), self.mean_positive_rate),
        ];
        for m in &self.series {
            out.push((format!("positive_rate[{}]", m.key), m.positive_rate));
        }
        out
    }
}

/// The movie groups every baseline is run on; sampled from a stream that
/// depends only on the seed.
pub fn movie_groups(
    stats: &RatingStats,
    specs: &[GroupSpec],
    seed: u64,
) -> Result<BTreeMap<String, Vec<CanonicalKey>>> {
    sample_movie_groups(stats, specs, &mut case_rng(seed, "t2/groups")).context("sampling movie groups")
}

/// Binary preference: `n_simulators` fresh personas per movie answer
/// whether they liked it. One output per group.
pub fn run_t2(
    ctx: &TaskContext<'_>,
    stats: &RatingStats,
    groups: &BTreeMap<String, Vec<CanonicalKey>>,
    baseline: Baseline,
) -> Result<Vec<TaskOutput>> {
    check_baseline(Task::T2, baseline)?;
    let n = ctx.run.n_simulators;
    let mut outputs = Vec::new();
    for (group, movies) in groups {
        let mut skipped = BTreeMap::new();
        let mut prompts: Vec<PromptCase> = Vec::with_capacity(movies.len() * n);
        for key in movies {
            let movie = stats
                .get(key)
                .with_context(|| format!("{key} has no rating statistics"))?;
            let source_ref = format!("movielens:{key}");
            for i in 0..n {
                let id = format!("t2/{baseline}/{group}/{key}/{i:03}");
                let src = PromptSource::BinPref {
                    source_ref: &source_ref,
                    movie: &movie.title,
                };
                if let Some(p) = ctx.render(id, baseline, &src, &mut skipped)? {
                    prompts.push(p);
                }
            }
        }
        let (results, replies) = ctx.execute(Task::T2, &prompts)?;

        let mut records = Vec::with_capacity(prompts.len());
        let mut answers: BTreeMap<&CanonicalKey, Vec<Option<BinaryAnswer>>> = BTreeMap::new();
        for ((p, r), key) in prompts
            .iter()
            .zip(&results)
            .zip(movies.iter().flat_map(|k| std::iter::repeat_n(k, n)))
        {
            let parsed = r.as_ref().ok().map(|reply| parse_binary(&reply.raw_text));
            if let Some(o) = &parsed {
                answers.entry(key).or_default().push(o.binary());
            }
            records.push(CaseRecord::new(p, r, parsed.and_then(|o| o.payload().cloned())).with("movie", key));
        }

        let mut sim_series = Vec::new();
        let mut human_series = Vec::new();
        for key in movies {
            let m = &stats.per_movie[key];
            let rate = positive_rate(answers.get(key).into_iter().flatten().copied());
            let base = MovieRate {
                key: key.clone(),
                title: m.title.clone(),
                avg_rating: m.avg_rating,
                num_ratings: m.num_ratings,
                positive_rate: rate.rate,
                yes: rate.yes,
                no: rate.no,
                invalid: rate.invalid,
            };
            human_series.push(MovieRate {
                positive_rate: Stat::Value(m.liked_rate()),
                yes: m.num_liked,
                no: m.num_ratings - m.num_liked,
                invalid: 0,
                ..base.clone()
            });
            sim_series.push(base);
        }
        outputs.push(TaskOutput {
            report: TaskReport::new(
                ctx,
                Task::T2,
                baseline,
                group.clone(),
                records,
                skipped,
                Metrics::Preference(PreferenceMetrics::from_series(sim_series)),
                Metrics::Preference(PreferenceMetrics::from_series(human_series)),
            ),
            prompts,
            replies,
        });
    }
    Ok(outputs)
}

//! Tables and charts from task reports. Rendering only formats numbers the
//! reports already hold; nothing is recomputed here.

mod svg;
mod table;

use std::collections::{BTreeMap, BTreeSet};

use anyhow::Result;
use usersim_core::aspect::Sentiment;
use usersim_core::metrics::Stat;
use usersim_core::{Baseline, Dataset, Task};

use crate::tasks::{
    AspectMetrics, FeedbackMetrics, ItemMetrics, Metrics, PreferenceMetrics, RequestMetrics, TaskReport,
};

pub use svg::{bar_chart, placeholder, xy_chart, Series};
pub use table::{fmt_f64, fmt_p, fmt_stat, Table};

use table::missing;

/// Relative output path to file bytes.
pub type Files = BTreeMap<String, Vec<u8>>;

/// Renders every table and chart the reports support.
pub fn render(reports: &[TaskReport]) -> Result<Files> {
    let mut reports: Vec<&TaskReport> = reports.iter().collect();
    reports.sort_by(|a, b| (a.task, &a.scope, a.baseline).cmp(&(b.task, &b.scope, b.baseline)));

    let mut files = Files::new();
    let mut notes = Vec::new();
    let mut tables = Vec::new();

    let by_task = |t: Task| reports.iter().copied().filter(move |r| r.task == t).collect::<Vec<_>>();
    let sections: [(Task, &str); 5] = [
        (Task::T1, "t1_entropy, t1_details"),
        (Task::T2, "t2_correlation, t2_details"),
        (Task::T3, "t3_aspects"),
        (Task::T4, "t4_diversity, t4_bins"),
        (Task::T5, "t5_coherence"),
    ];
    for (task, names) in sections {
        let rs = by_task(task);
        if rs.is_empty() {
            notes.push(format!("{names}: omitted, no {task} report in this run"));
            continue;
        }
        match task {
            Task::T1 => tables.extend(t1_tables(&rs)),
            Task::T2 => tables.extend(t2_tables(&rs)),
            Task::T3 => tables.push(t3_table(&rs)),
            Task::T4 => tables.extend(t4_tables(&rs)),
            Task::T5 => tables.push(t5_table(&rs)),
        }
        for r in &rs {
            let (svg, csv) = chart(r)?;
            files.insert(format!("charts/{}.svg", r.stem()), svg.into_bytes());
            files.insert(format!("charts/{}.csv", r.stem()), csv);
        }
    }
    if reports.is_empty() {
        notes.push("invalid_rates: omitted, no reports".to_string());
    } else {
        tables.push(invalid_rates(&reports));
    }
    for t in &tables {
        files.insert(format!("tables/{}.csv", t.name), t.to_csv()?);
        files.insert(format!("tables/{}.txt", t.name), t.to_text().into_bytes());
    }
    let notes = if notes.is_empty() {
        "all tables rendered\n".to_string()
    } else {
        notes.join("\n") + "\n"
    };
    files.insert("tables/NOTES.txt".into(), notes.into_bytes());
    Ok(files)
}

fn items(m: &Metrics) -> Option<&ItemMetrics> {
    match m {
        Metrics::Items(x) => Some(x),
        _ => None,
    }
}

fn preference(m: &Metrics) -> Option<&PreferenceMetrics> {
    match m {
        Metrics::Preference(x) => Some(x),
        _ => None,
    }
}

fn aspects(m: &Metrics) -> Option<&AspectMetrics> {
    match m {
        Metrics::Aspects(x) => Some(x),
        _ => None,
    }
}

fn requests(m: &Metrics) -> Option<&RequestMetrics> {
    match m {
        Metrics::Requests(x) => Some(x),
        _ => None,
    }
}

fn feedback(m: &Metrics) -> Option<&FeedbackMetrics> {
    match m {
        Metrics::Feedback(x) => Some(x),
        _ => None,
    }
}

/// Dataset columns in the usual order, then anything else by name.
fn dataset_order(scopes: &BTreeSet<&str>) -> Vec<String> {
    let mut out: Vec<String> = [Dataset::Imdb, Dataset::Reddit, Dataset::Redial]
        .iter()
        .map(|d| d.name().to_string())
        .filter(|n| scopes.contains(n.as_str()))
        .collect();
    for s in scopes {
        if !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    }
    out
}

fn scope_label(scope: &str) -> String {
    Dataset::parse(scope)
        .map(|d| d.label().to_string())
        .unwrap_or_else(|| scope.to_string())
}

fn baselines(rs: &[&TaskReport]) -> Vec<Baseline> {
    rs.iter()
        .map(|r| r.baseline)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Wide table: a human row then one row per baseline, one column per scope.
fn wide(
    name: &str,
    title: &str,
    rs: &[&TaskReport],
    scopes: &[String],
    human: impl Fn(&TaskReport) -> Option<Stat>,
    sim: impl Fn(&TaskReport) -> Option<Stat>,
) -> Table {
    let labels: Vec<String> = scopes.iter().map(|s| scope_label(s)).collect();
    let mut headers = vec!["Generator"];
    headers.extend(labels.iter().map(String::as_str));
    let mut t = Table::new(name, title, &headers);
    let find = |b: Option<Baseline>, scope: &str| {
        rs.iter()
            .find(|r| r.scope == scope && b.is_none_or(|b| r.baseline == b))
            .copied()
    };
    let mut row = vec!["Human".to_string()];
    for s in scopes {
        row.push(find(None, s).and_then(&human).map(fmt_stat).unwrap_or_else(missing));
    }
    t.push(row);
    for b in baselines(rs) {
        let mut row = vec![b.label().to_string()];
        for s in scopes {
            row.push(find(Some(b), s).and_then(&sim).map(fmt_stat).unwrap_or_else(missing));
        }
        t.push(row);
    }
    t
}

fn t1_tables(rs: &[&TaskReport]) -> Vec<Table> {
    let scopes = dataset_order(&rs.iter().map(|r| r.scope.as_str()).collect());
    let entropy = wide(
        "t1_entropy",
        "Entropy of mentioned items (bits)",
        rs,
        &scopes,
        |r| items(&r.human).map(|m| m.dataset_entropy.unwrap_or(m.entropy)),
        |r| items(&r.metrics).map(|m| m.entropy),
    );
    let mut details = Table::new(
        "t1_details",
        "Item mentions per run",
        &[
            "Dataset",
            "Generator",
            "Cases",
            "Failed",
            "Invalid",
            "Entropy",
            "Human (same cases)",
            "Distinct items",
            "Mentions",
            "Unmatched",
            "Match rate",
            "Fuzzy matches",
        ],
    );
    for s in &scopes {
        for r in rs.iter().filter(|r| &r.scope == s) {
            let (Some(m), Some(h)) = (items(&r.metrics), items(&r.human)) else {
                continue;
            };
            details.push(vec![
                scope_label(s),
                r.baseline.label().to_string(),
                r.counts.cases.to_string(),
                r.counts.failures.to_string(),
                r.counts.invalid.to_string(),
                fmt_stat(m.entropy),
                fmt_stat(h.entropy),
                m.distinct_items.to_string(),
                m.mentions.to_string(),
                m.unmatched.to_string(),
                fmt_stat(m.match_rate),
                m.fuzzy_matches.to_string(),
            ]);
        }
    }
    vec![entropy, details]
}

fn t2_tables(rs: &[&TaskReport]) -> Vec<Table> {
    let scopes: Vec<String> = rs
        .iter()
        .map(|r| r.scope.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let corr = wide(
        "t2_correlation",
        "Pearson correlation of positive rate with average rating",
        rs,
        &scopes,
        |r| preference(&r.human).map(|m| m.pearson),
        |r| preference(&r.metrics).map(|m| m.pearson),
    );
    let mut details = Table::new(
        "t2_details",
        "Binary preference per movie group",
        &[
            "Group",
            "Generator",
            "Movies",
            "Excluded movies",
            "Pearson r",
            "p-value",
            "Mean positive rate",
            "Human r",
            "Human p-value",
            "Human mean rate",
            "Invalid rate",
        ],
    );
    for s in &scopes {
        for r in rs.iter().filter(|r| &r.scope == s) {
            let (Some(m), Some(h)) = (preference(&r.metrics), preference(&r.human)) else {
                continue;
            };
            details.push(vec![
                s.clone(),
                r.baseline.label().to_string(),
                m.movies.to_string(),
                m.excluded_movies.to_string(),
                fmt_stat(m.pearson),
                fmt_p(m.p_value),
                fmt_stat(m.mean_positive_rate),
                fmt_stat(h.pearson),
                fmt_p(h.p_value),
                fmt_stat(h.mean_positive_rate),
                fmt_stat(r.counts.invalid_rate),
            ]);
        }
    }
    vec![corr, details]
}

fn t3_table(rs: &[&TaskReport]) -> Table {
    let mut t = Table::new(
        "t3_aspects",
        "Aspects in open-ended preference",
        &[
            "Generator",
            "Texts",
            "Excluded",
            "Pairs",
            "Aspects",
            "Aspect entropy",
            "Sentiment entropy",
        ],
    );
    let row = |label: String, m: &AspectMetrics| {
        vec![
            label,
            m.texts.to_string(),
            m.excluded.to_string(),
            m.num_pairs.to_string(),
            m.num_aspects.to_string(),
            fmt_stat(m.aspect_entropy),
            fmt_stat(m.sentiment_entropy),
        ]
    };
    if let Some(h) = rs.first().and_then(|r| aspects(&r.human)) {
        t.push(row("Human".into(), h));
    }
    for r in rs {
        if let Some(m) = aspects(&r.metrics) {
            t.push(row(r.baseline.label().to_string(), m));
        }
    }
    t
}

fn t4_tables(rs: &[&TaskReport]) -> Vec<Table> {
    let mut t = Table::new(
        "t4_diversity",
        "Lexical and semantic diversity of recommendation requests",
        &[
            "Generator",
            "Requests",
            "Type-token ratio",
            "Word diversity",
            "Sentence diversity",
            "OOV words",
        ],
    );
    let row = |label: String, m: &RequestMetrics| {
        vec![
            label,
            m.requests.to_string(),
            fmt_stat(m.type_token_ratio),
            fmt_stat(m.word_diversity),
            fmt_stat(m.sentence_diversity),
            m.oov_words.to_string(),
        ]
    };
    let mut bins = Table::new(
        "t4_bins",
        "Sentence diversity by request-entropy bin",
        &["Generator", "Bin", "Lower", "Upper", "Members", "Diversity"],
    );
    let mut bin_rows = |label: &str, m: &RequestMetrics| {
        for (i, b) in m.bins.iter().enumerate() {
            bins.push(vec![
                label.to_string(),
                (i + 1).to_string(),
                fmt_f64(b.lower),
                fmt_f64(b.upper),
                b.members.to_string(),
                fmt_stat(b.diversity),
            ]);
        }
    };
    if let Some(h) = rs.first().and_then(|r| requests(&r.human)) {
        t.push(row("Human".into(), h));
        bin_rows("Human", h);
    }
    for r in rs {
        if let Some(m) = requests(&r.metrics) {
            t.push(row(r.baseline.label().to_string(), m));
            bin_rows(r.baseline.label(), m);
        }
    }
    vec![t, bins]
}

fn t5_table(rs: &[&TaskReport]) -> Table {
    let mut t = Table::new(
        "t5_coherence",
        "Coherence of feedback on recommendations",
        &[
            "Generator",
            "Shown",
            "Coherent (positive)",
            "Likely incoherent (positive)",
            "Incoherent (negative)",
            "Coherent (negative)",
            "Overall coherent",
            "Compare coherent",
            "Neither rate",
            "Invalid",
        ],
    );
    let mut rows = |label: &str, m: &FeedbackMetrics| {
        for v in &m.variants {
            let a = &v.accept_reject;
            let c = &v.compare;
            t.push(vec![
                label.to_string(),
                if v.explanations { "items + explanation" } else { "items" }.to_string(),
                fmt_stat(a.coherent_positive),
                fmt_stat(a.likely_incoherent),
                fmt_stat(a.incoherent),
                fmt_stat(a.coherent_negative),
                fmt_stat(a.overall_coherent),
                fmt_stat(c.coherent),
                fmt_stat(c.neither_rate),
                (a.invalid + c.invalid).to_string(),
            ]);
        }
    };
    if let Some(h) = rs.first().and_then(|r| feedback(&r.human)) {
        rows("Human", h);
    }
    for r in rs {
        if let Some(m) = feedback(&r.metrics) {
            rows(r.baseline.label(), m);
        }
    }
    t
}

fn invalid_rates(rs: &[&TaskReport]) -> Table {
    let mut t = Table::new(
        "invalid_rates",
        "Unparseable and failed replies",
        &[
            "Task",
            "Generator",
            "Scope",
            "Cases",
            "Succeeded",
            "Failed",
            "Invalid",
            "Invalid rate",
            "Skipped",
        ],
    );
    for r in rs {
        let c = &r.counts;
        t.push(vec![
            r.task.id().to_string(),
            r.baseline.label().to_string(),
            r.scope.clone(),
            c.cases.to_string(),
            c.successes.to_string(),
            c.failures.to_string(),
            c.invalid.to_string(),
            fmt_stat(c.invalid_rate),
            c.skipped.values().sum::<u64>().to_string(),
        ]);
    }
    t
}

fn csv_bytes(headers: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(headers)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner()?)
}

fn opt_stat(s: Stat) -> Option<f64> {
    s.value()
}

fn share(part: u64, total: u64) -> Option<f64> {
    (total > 0).then(|| part as f64 / total as f64)
}

/// One chart per report, plus the series behind it.
fn chart(r: &TaskReport) -> Result<(String, Vec<u8>)> {
    let title = format!("{} {} ({})", r.task.name(), r.baseline.label(), r.scope);
    match (&r.metrics, &r.human) {
        (Metrics::Items(m), Metrics::Items(h)) => {
            let n = m.sorted_counts.len().max(h.sorted_counts.len());
            let total = |v: &[(String, u64)]| v.iter().map(|x| x.1).sum::<u64>();
            let (tm, th) = (total(&m.sorted_counts), total(&h.sorted_counts));
            let rows = (0..n)
                .map(|i| {
                    let cell =
                        |v: &[(String, u64)]| v.get(i).map(|(k, c)| (k.clone(), c.to_string())).unwrap_or_default();
                    let (mk, mc) = cell(&m.sorted_counts);
                    let (hk, hc) = cell(&h.sorted_counts);
                    vec![(i + 1).to_string(), mk, mc, hk, hc]
                })
                .collect();
            let series = |name: &str, v: &[(String, u64)], t: u64| Series {
                name: name.into(),
                points: v
                    .iter()
                    .enumerate()
                    .filter_map(|(i, (_, c))| Some(((i + 1) as f64, share(*c, t)?)))
                    .collect(),
            };
            let svg = xy_chart(
                &title,
                "rank",
                "share of mentions",
                &[
                    series("Simulator", &m.sorted_counts, tm),
                    series("Human", &h.sorted_counts, th),
                ],
                false,
            );
            Ok((
                svg,
                csv_bytes(
                    &["rank", "simulator_item", "simulator_count", "human_item", "human_count"],
                    rows,
                )?,
            ))
        }
        (Metrics::Preference(m), Metrics::Preference(h)) => {
            let human: BTreeMap<_, _> = h.series.iter().map(|x| (&x.key, x.positive_rate)).collect();
            let rows = m
                .series
                .iter()
                .map(|x| {
                    vec![
                        x.key.to_string(),
                        x.title.clone(),
                        fmt_f64(x.avg_rating),
                        fmt_stat(x.positive_rate),
                        human.get(&x.key).copied().map(fmt_stat).unwrap_or_else(missing),
                    ]
                })
                .collect();
            let points = |v: &[crate::tasks::MovieRate]| {
                v.iter()
                    .filter_map(|x| Some((x.avg_rating, opt_stat(x.positive_rate)?)))
                    .collect()
            };
            let svg = xy_chart(
                &title,
                "average rating",
                "positive rate",
                &[
                    Series {
                        name: "Simulator".into(),
                        points: points(&m.series),
                    },
                    Series {
                        name: "Human".into(),
                        points: points(&h.series),
                    },
                ],
                true,
            );
            Ok((
                svg,
                csv_bytes(&["key", "title", "avg_rating", "simulator_rate", "human_rate"], rows)?,
            ))
        }
        (Metrics::Aspects(m), Metrics::Aspects(h)) => {
            let total = |x: &AspectMetrics| x.sentiments.values().sum::<u64>();
            let (tm, th) = (total(m), total(h));
            let get = |x: &AspectMetrics, s: Sentiment| x.sentiments.get(&s).copied().unwrap_or(0);
            let cats: Vec<String> = Sentiment::ALL.iter().map(|s| s.as_str().to_string()).collect();
            let rows = Sentiment::ALL
                .iter()
                .map(|&s| {
                    vec![
                        s.as_str().to_string(),
                        get(m, s).to_string(),
                        share(get(m, s), tm).map(fmt_f64).unwrap_or_else(missing),
                        get(h, s).to_string(),
                        share(get(h, s), th).map(fmt_f64).unwrap_or_else(missing),
                    ]
                })
                .collect();
            let series = |x: &AspectMetrics, t: u64| Sentiment::ALL.iter().map(|&s| share(get(x, s), t)).collect();
            let svg = bar_chart(
                &title,
                "share of aspect mentions",
                &cats,
                &[("Simulator".into(), series(m, tm)), ("Human".into(), series(h, th))],
            );
            Ok((
                svg,
                csv_bytes(
                    &[
                        "sentiment",
                        "simulator_count",
                        "simulator_share",
                        "human_count",
                        "human_share",
                    ],
                    rows,
                )?,
            ))
        }
        (Metrics::Requests(m), Metrics::Requests(h)) => {
            let n = m.bins.len().max(h.bins.len());
            let cats: Vec<String> = (1..=n).map(|i| format!("bin {i}")).collect();
            let mut rows = Vec::new();
            for (label, x) in [("simulator", m), ("human", h)] {
                for (i, b) in x.bins.iter().enumerate() {
                    rows.push(vec![
                        label.to_string(),
                        (i + 1).to_string(),
                        fmt_f64(b.lower),
                        fmt_f64(b.upper),
                        b.members.to_string(),
                        fmt_stat(b.diversity),
                    ]);
                }
            }
            let series = |x: &RequestMetrics| {
                (0..n)
                    .map(|i| x.bins.get(i).and_then(|b| opt_stat(b.diversity)))
                    .collect()
            };
            let svg = bar_chart(
                &title,
                "sentence diversity",
                &cats,
                &[("Simulator".into(), series(m)), ("Human".into(), series(h))],
            );
            Ok((
                svg,
                csv_bytes(&["generator", "bin", "lower", "upper", "members", "diversity"], rows)?,
            ))
        }
        (Metrics::Feedback(m), Metrics::Feedback(h)) => {
            let cats: Vec<String> = ["positive accepted", "negative rejected", "compare coherent", "neither"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            let mut series = Vec::new();
            let mut rows = Vec::new();
            for (label, x) in [("Simulator", m), ("Human", h)] {
                for v in &x.variants {
                    let shown = if v.explanations { "items + explanation" } else { "items" };
                    let values = vec![
                        v.accept_reject.coherent_positive,
                        v.accept_reject.coherent_negative,
                        v.compare.coherent,
                        v.compare.neither_rate,
                    ];
                    for (c, s) in cats.iter().zip(&values) {
                        rows.push(vec![label.to_string(), shown.to_string(), c.clone(), fmt_stat(*s)]);
                    }
                    series.push((format!("{label}, {shown}"), values.into_iter().map(opt_stat).collect()));
                }
            }
            let svg = bar_chart(&title, "rate", &cats, &series);
            Ok((svg, csv_bytes(&["generator", "shown", "cell", "rate"], rows)?))
        }
        _ => Ok((
            placeholder(&title),
            csv_bytes(&["note"], vec![vec!["mismatched metrics".into()]])?,
        )),
    }
}
